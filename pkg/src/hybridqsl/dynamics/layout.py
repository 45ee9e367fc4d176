"""Flat storage of matrix-valued coordinates.

A trajectory state is a stack of ``L x L`` complex matrices, one per
generalised coordinate: subsystem operators first, then every bath position,
then every bath momentum. In memory a batch of states has shape
``(batch, n_coords, L, L)``; flattening that gives the canonical ordering
``(coordinate, alpha, alpha')``.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import LayoutMismatch


@dataclass(frozen=True)
class CoordinateLayout:
    L: int
    n_subsystem_coords: int
    n_oscillators: int

    def __post_init__(self):
        if self.L < 1 or self.n_subsystem_coords < 1 or self.n_oscillators < 0:
            raise LayoutMismatch(f"invalid layout {self}")
        if self.n_subsystem_coords > self.L**2:
            raise LayoutMismatch("more subsystem coordinates than L^2")

    @property
    def n_bath_coords(self) -> int:
        return 2 * self.n_oscillators

    @property
    def n_coords(self) -> int:
        return self.n_subsystem_coords + self.n_bath_coords

    @property
    def size(self) -> int:
        """Number of complex matrix elements (= coupled first-order ODEs)."""
        return self.L**2 * self.n_coords

    @property
    def max_equations(self) -> int:
        return self.L**2 * (self.L**2 - 1 + 2 * self.n_oscillators)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_coords, self.L, self.L)

    @property
    def r_slice(self) -> slice:
        s = self.n_subsystem_coords
        return slice(s, s + self.n_oscillators)

    @property
    def p_slice(self) -> slice:
        s = self.n_subsystem_coords + self.n_oscillators
        return slice(s, s + self.n_oscillators)

    def offset(self, coord: int, alpha: int, alpha_p: int) -> int:
        """Flat index of matrix element ``(alpha, alpha_p)`` of coordinate ``coord``."""
        if not (0 <= coord < self.n_coords and 0 <= alpha < self.L and 0 <= alpha_p < self.L):
            raise LayoutMismatch(f"index ({coord}, {alpha}, {alpha_p}) out of layout")
        return (coord * self.L + alpha) * self.L + alpha_p

    def check(self, y) -> None:
        if tuple(y.shape[-3:]) != self.shape:
            raise LayoutMismatch(f"state shape {y.shape} does not match layout {self.shape}")


def sbm_layout(n_osc: int) -> CoordinateLayout:
    """Three Pauli coordinates plus ``n_osc`` oscillators: 4 (3 + 2N) elements."""
    lay = CoordinateLayout(2, 3, n_osc)
    assert lay.size == 4 * (3 + 2 * n_osc) == lay.max_equations
    return lay


def fmo_layout(n_sites: int, m_per_site: int, redundant: bool = False) -> CoordinateLayout:
    """Site projectors plus ``n_sites * m_per_site`` oscillators.

    By default the last diagonal projector is eliminated through the
    completeness relation, leaving ``L^2 - 1`` subsystem coordinates and
    ``L^2 (L^2 - 1 + 2 L M)`` elements (49 x (48 + 14 M) for seven sites).
    ``redundant=True`` keeps all ``L^2`` projectors so that trace conservation
    can be checked rather than imposed.
    """
    n_sub = n_sites**2 if redundant else n_sites**2 - 1
    lay = CoordinateLayout(n_sites, n_sub, n_sites * m_per_site)
    if not redundant:
        assert lay.size == lay.max_equations
    return lay
