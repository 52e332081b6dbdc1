"""Axis-aligned flight volume shared by both environments."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Arena:
    """Bounds of the flyable volume, meters, inertial frame, z up."""

    x_min: float = -3.4
    x_max: float = 3.4
    y_min: float = -1.4
    y_max: float = 1.4
    z_min: float = 0.0
    z_max: float = 2.4

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max
                and self.z_min < self.z_max):
            raise ValueError("arena bounds must have positive extent")

    @property
    def x_halfwidth(self) -> float:
        return 0.5 * (self.x_max - self.x_min)

    @property
    def y_halfwidth(self) -> float:
        return 0.5 * (self.y_max - self.y_min)

    @property
    def z_halfwidth(self) -> float:
        return 0.5 * (self.z_max - self.z_min)

    def near_xz_wall(self, x: float, z: float, margin: float) -> bool:
        """True when the point sits within margin of any wall of the xz slice."""
        return (x - self.x_min < margin or self.x_max - x < margin
                or z - self.z_min < margin or self.z_max - z < margin)
