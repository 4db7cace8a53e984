"""Recursive construction of formal powers on the radial mesh.

A formal power of degree n is produced by seeding a degree-0 combination
lambda*F + mu*G at the expansion center with the pair of index n (mod the
sequence period) and applying the pair integral n times, descending to pair
index 0 and multiplying by the degree at each step:

    Z^(0) at pair index n  --int,(n-1 pair)-->  ...  --int,(0 pair)-->  Z^(n).

Because the sequence period is at most 2, a single chain started at parity s
delivers all pair-0 powers of degrees d == s (mod 2): the degree-d
intermediate of that chain carries pair index (s - d) mod 2, which is 0
exactly when d and s share parity. Two chains (one per parity) therefore
produce the whole table in O(N) integrations per seed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .pseudoanalytic import (
    GeneratingPair,
    GeneratingSequence,
    RadialMesh,
    fg_integral,
    vekua_residual,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FormalPowerTable:
    """Formal powers for seeds 1 and i at every mesh node, degrees 0..N."""

    N: int
    z0: complex
    mesh: RadialMesh
    Z1: np.ndarray  # (N+1, P, S+1) complex, seed 1
    Zi: np.ndarray  # (N+1, P, S+1) complex, seed i

    def re_trace(self, seed: str, n: int) -> np.ndarray:
        """Boundary trace Re Z^(n)(seed)|_Gamma at the ray endpoints."""
        Z = self.Z1 if seed == "1" else self.Zi
        return Z[n, :, -1].real.copy()


def degree_zero(pair: GeneratingPair, a0: complex, mesh: RadialMesh) -> np.ndarray:
    """Degree-0 power lambda*F + mu*G with real lambda, mu matching a0 at the center.

    The 2x2 real system is [Re F, Re G; Im F, Im G] (lambda, mu)^T =
    (Re a0, Im a0)^T at the center node; its determinant is Im(conj(F) G) > 0,
    so the pair condition guarantees solvability.
    """
    F0 = complex(pair.F[0, 0])
    G0 = complex(pair.G[0, 0])
    M = np.array([[F0.real, G0.real], [F0.imag, G0.imag]], dtype=float)
    det = np.linalg.det(M)
    if abs(det) < 1e-14:
        raise NumericalError(f"singular degree-0 system at the center (det={det:.3e})")
    lam, mu = np.linalg.solve(M, [complex(a0).real, complex(a0).imag])
    return lam * pair.F + mu * pair.G


def _check_finite(W: np.ndarray, degree: int):
    bad = ~np.isfinite(W)
    if bad.any():
        r, s = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite formal power value at degree {degree}, ray {r}, step {s}")


def formal_power_fields(seq: GeneratingSequence, mesh: RadialMesh, N: int,
                        seed: complex, rule: str = "cubic") -> np.ndarray:
    """Pair-0 formal powers Z^(0..N)(seed, z; z0) as an (N+1, P, S+1) array."""
    if N < 0:
        raise ValidationError(f"N must be non-negative, got {N}")
    k = seq.period
    out = np.empty((N + 1,) + mesh.nodes.shape, dtype=complex)
    for start in range(min(k, N + 1)):
        # the chain seeded at pair index `start` delivers the pair-0 powers of
        # degrees d with (start - d) % k == 0
        W = degree_zero(seq.pair_for(start), seed, mesh)
        if start % k == 0:
            out[0] = W
        for d in range(1, N + 1):
            W = d * fg_integral(W, seq.pair_for(start - d), mesh, rule=rule)
            _check_finite(W, d)
            if (start - d) % k == 0:
                out[d] = W
    return out


def build_table(seq: GeneratingSequence, mesh: RadialMesh, N: int,
                rule: str = "cubic") -> FormalPowerTable:
    """Build the full table for seeds 1 and i."""
    Z1 = formal_power_fields(seq, mesh, N, 1.0, rule=rule)
    Zi = formal_power_fields(seq, mesh, N, 1j, rule=rule)
    return FormalPowerTable(N=N, z0=mesh.z0, mesh=mesh, Z1=Z1, Zi=Zi)


def pseudoanalyticity_check(table: FormalPowerTable, p: np.ndarray,
                            keep: np.ndarray | None = None) -> np.ndarray:
    """Max interior Vekua residual of each degree (both seeds).

    ``p`` is the pair-0 field sqrt-of-conductivity sampled on the mesh.
    ``keep``, when given, is a boolean node mask restricting the check (used
    to stay clear of conductivity discontinuities, where the mesh
    finite differences see the jump rather than the equation).
    """
    mesh = table.mesh
    out = np.empty(table.N + 1)
    for n in range(table.N + 1):
        res = np.fmax(vekua_residual(table.Z1[n], p, mesh),
                      vekua_residual(table.Zi[n], p, mesh))
        res = res[:, 1:-1]
        if keep is not None:
            res = np.where(keep[:, 1:-1], res, np.nan)
        out[n] = float(np.nanmax(res))
    return out


def write_powers_csv(table: FormalPowerTable, path):
    """Dump the table as degree,seed,ray,step,x,y,ReZ,ImZ rows."""
    mesh = table.mesh
    x, y = mesh.xy()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["degree", "seed", "ray", "step", "x", "y", "ReZ", "ImZ"])
        for seed, Z in (("1", table.Z1), ("i", table.Zi)):
            for n in range(table.N + 1):
                for r in range(mesh.ray_count):
                    for s in range(mesh.step_count + 1):
                        w.writerow([n, seed, r, s,
                                    f"{x[r, s]:.17g}", f"{y[r, s]:.17g}",
                                    f"{Z[n, r, s].real:.17g}", f"{Z[n, r, s].imag:.17g}"])
    log.info("wrote formal power dump to %s", path)
