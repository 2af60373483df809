"""Datum-correct WGS84 <-> UTM transforms and raster geotransform algebra.

The Transverse Mercator mapping uses the Krueger series expanded to sixth
order in the third flattening, which keeps forward/inverse errors well below
a millimeter anywhere inside normal UTM validity (|lat| <= 84 deg).

Raster coordinate convention used throughout the package: (col, row) = (0, 0)
is the CENTER of the top-left pixel, and the geotransform origin is the world
position of that center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# WGS84 ellipsoid
WGS84_A = 6378137.0
WGS84_INV_F = 298.257223563

UTM_SCALE = 0.9996
UTM_FALSE_EASTING = 500000.0
UTM_FALSE_NORTHING_SOUTH = 10000000.0
UTM_MAX_LAT = 84.0

_F = 1.0 / WGS84_INV_F
_E = math.sqrt(_F * (2.0 - _F))          # first eccentricity
_E2 = _F * (2.0 - _F)
_N = _F / (2.0 - _F)                     # third flattening

# Rectifying radius: A = a/(1+n) * (1 + n^2/4 + n^4/64 + n^6/256)
_A_RECT = WGS84_A / (1.0 + _N) * (1.0 + _N**2 / 4.0 + _N**4 / 64.0 + _N**6 / 256.0)

# Krueger series coefficients, order n^6.
_ALPHA = (
    _N / 2.0 - 2.0 * _N**2 / 3.0 + 5.0 * _N**3 / 16.0 + 41.0 * _N**4 / 180.0
    - 127.0 * _N**5 / 288.0 + 7891.0 * _N**6 / 37800.0,
    13.0 * _N**2 / 48.0 - 3.0 * _N**3 / 5.0 + 557.0 * _N**4 / 1440.0
    + 281.0 * _N**5 / 630.0 - 1983433.0 * _N**6 / 1935360.0,
    61.0 * _N**3 / 240.0 - 103.0 * _N**4 / 140.0 + 15061.0 * _N**5 / 26880.0
    + 167603.0 * _N**6 / 181440.0,
    49561.0 * _N**4 / 161280.0 - 179.0 * _N**5 / 168.0 + 6601661.0 * _N**6 / 7257600.0,
    34729.0 * _N**5 / 80640.0 - 3418889.0 * _N**6 / 1995840.0,
    212378941.0 * _N**6 / 319334400.0,
)
_BETA = (
    _N / 2.0 - 2.0 * _N**2 / 3.0 + 37.0 * _N**3 / 96.0 - _N**4 / 360.0
    - 81.0 * _N**5 / 512.0 + 96199.0 * _N**6 / 604800.0,
    _N**2 / 48.0 + _N**3 / 15.0 - 437.0 * _N**4 / 1440.0 + 46.0 * _N**5 / 105.0
    - 1118711.0 * _N**6 / 3870720.0,
    17.0 * _N**3 / 480.0 - 37.0 * _N**4 / 840.0 - 209.0 * _N**5 / 4480.0
    + 5569.0 * _N**6 / 90720.0,
    4397.0 * _N**4 / 161280.0 - 11.0 * _N**5 / 504.0 - 830251.0 * _N**6 / 7257600.0,
    4583.0 * _N**5 / 161280.0 - 108847.0 * _N**6 / 3991680.0,
    20648693.0 * _N**6 / 638668800.0,
)


class GeodesyError(ValueError):
    """Invalid coordinate or transform outside the supported domain."""


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 geographic position in decimal degrees, optional ellipsoidal height."""

    lat: float
    lon: float
    alt: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise GeodesyError("lat/lon must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise GeodesyError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise GeodesyError(f"longitude {self.lon} outside [-180, 180)")
        if self.alt is not None and not math.isfinite(self.alt):
            raise GeodesyError("altitude must be finite when given")


@dataclass(frozen=True)
class UtmCoord:
    """Projected UTM position. Hemisphere is 'N' or 'S'."""

    easting: float
    northing: float
    zone: int
    hemisphere: str

    def __post_init__(self):
        if not 1 <= self.zone <= 60:
            raise GeodesyError(f"UTM zone {self.zone} outside 1..60")
        if self.hemisphere not in ("N", "S"):
            raise GeodesyError(f"hemisphere must be 'N' or 'S', got {self.hemisphere!r}")
        if not 100000.0 < self.easting < 900000.0:
            raise GeodesyError(f"easting {self.easting} outside (100000, 900000)")
        if not 0.0 <= self.northing < 10000000.0:
            raise GeodesyError(f"northing {self.northing} outside [0, 10000000)")


def utm_zone_for(lon: float) -> int:
    """Standard 6-degree zone numbering: floor(lon/6) + 31."""
    zone = int(math.floor(lon / 6.0)) + 31
    return min(max(zone, 1), 60)


def zone_central_meridian(zone: int) -> float:
    return zone * 6.0 - 183.0


def _tau_prime(tau: float) -> float:
    sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
    return tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau)


def _tau_from_tau_prime(taup: float) -> float:
    # Newton inversion of tau' (Karney 2011); converges in a handful of steps.
    tau = taup / (1.0 - _E2)
    for _ in range(8):
        sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
        f = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau) - taup
        df = ((math.hypot(1.0, sigma) * math.hypot(1.0, tau) - sigma * tau)
              * (1.0 - _E2) * math.hypot(1.0, tau) / (1.0 + (1.0 - _E2) * tau * tau))
        step = f / df
        tau -= step
        if abs(step) < 1e-16 * max(1.0, abs(tau)):
            break
    return tau


def wgs84_to_utm(p: GeoPoint, forced_zone: int | None = None) -> UtmCoord:
    """Forward Transverse Mercator on the WGS84 ellipsoid.

    The zone is derived from longitude unless ``forced_zone`` pins it (useful
    to keep a flight spanning a zone boundary in one projected frame).
    Latitudes beyond +/-84 deg are outside UTM validity and rejected.
    """
    if abs(p.lat) > UTM_MAX_LAT:
        raise GeodesyError(f"latitude {p.lat} outside UTM validity (|lat| <= 84)")
    if forced_zone is not None and not 1 <= forced_zone <= 60:
        raise GeodesyError(f"forced zone {forced_zone} outside 1..60")
    zone = forced_zone if forced_zone is not None else utm_zone_for(p.lon)

    lam = math.radians(p.lon - zone_central_meridian(zone))
    phi = math.radians(p.lat)

    taup = _tau_prime(math.tan(phi))
    xi_p = math.atan2(taup, math.cos(lam))
    eta_p = math.asinh(math.sin(lam) / math.hypot(taup, math.cos(lam)))

    xi = xi_p
    eta = eta_p
    for j, a in enumerate(_ALPHA, start=1):
        xi += a * math.sin(2 * j * xi_p) * math.cosh(2 * j * eta_p)
        eta += a * math.cos(2 * j * xi_p) * math.sinh(2 * j * eta_p)

    easting = UTM_FALSE_EASTING + UTM_SCALE * _A_RECT * eta
    northing = UTM_SCALE * _A_RECT * xi
    hemisphere = "N" if p.lat >= 0.0 else "S"
    if hemisphere == "S":
        northing += UTM_FALSE_NORTHING_SOUTH
    return UtmCoord(easting, northing, zone, hemisphere)


def utm_to_wgs84(u: UtmCoord) -> GeoPoint:
    """Inverse Transverse Mercator; round-trips with :func:`wgs84_to_utm` to <1e-7 deg."""
    northing = u.northing
    if u.hemisphere == "S":
        northing -= UTM_FALSE_NORTHING_SOUTH
    xi = northing / (UTM_SCALE * _A_RECT)
    eta = (u.easting - UTM_FALSE_EASTING) / (UTM_SCALE * _A_RECT)

    xi_p = xi
    eta_p = eta
    for j, b in enumerate(_BETA, start=1):
        xi_p -= b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    taup = math.sin(xi_p) / math.hypot(math.sinh(eta_p), math.cos(xi_p))
    lam = math.atan2(math.sinh(eta_p), math.cos(xi_p))

    lat = math.degrees(math.atan(_tau_from_tau_prime(taup)))
    lon = zone_central_meridian(u.zone) + math.degrees(lam)
    if lon >= 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    if abs(lat) > UTM_MAX_LAT + 1e-9:
        raise GeodesyError("coordinates invert outside UTM validity; "
                           "zone/hemisphere are likely inconsistent")
    return GeoPoint(lat, lon)


@dataclass(frozen=True)
class AffineGeotransform:
    """World <-> pixel affine map, pixel-center convention.

    world_x = origin_x + col*pixel_w + row*rot_x
    world_y = origin_y + col*rot_y + row*pixel_h

    pixel_h is negative for the usual north-up rasters.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float
    rot_x: float = 0.0
    rot_y: float = 0.0

    def __post_init__(self):
        if self.det == 0.0:
            raise GeodesyError("geotransform linear part is singular")

    @property
    def det(self) -> float:
        return self.pixel_w * self.pixel_h - self.rot_x * self.rot_y


def pixel_to_world(gt: AffineGeotransform, col: float, row: float) -> tuple[float, float]:
    x = gt.origin_x + col * gt.pixel_w + row * gt.rot_x
    y = gt.origin_y + col * gt.rot_y + row * gt.pixel_h
    return x, y


def world_to_pixel(gt: AffineGeotransform, x: float, y: float) -> tuple[float, float]:
    dx = x - gt.origin_x
    dy = y - gt.origin_y
    col = (dx * gt.pixel_h - dy * gt.rot_x) / gt.det
    row = (dy * gt.pixel_w - dx * gt.rot_y) / gt.det
    return col, row


def read_world_file(path) -> AffineGeotransform:
    """Six-line world file; like the rest of the package, the origin is the
    CENTER of the top-left pixel. Line order: x size, y rotation, x rotation,
    y size, origin x, origin y."""
    lines = [ln.strip() for ln in open(path) if ln.strip()]
    if len(lines) != 6:
        raise GeodesyError(f"world file {path} has {len(lines)} values, "
                           "expected 6")
    try:
        a, d, b, e, c, f = (float(v) for v in lines)
    except ValueError as exc:
        raise GeodesyError(f"world file {path}: {exc}") from None
    return AffineGeotransform(origin_x=c, origin_y=f, pixel_w=a, pixel_h=e,
                              rot_x=b, rot_y=d)


def write_world_file(gt: AffineGeotransform, path) -> None:
    with open(path, "w") as f:
        for v in (gt.pixel_w, gt.rot_y, gt.rot_x, gt.pixel_h,
                  gt.origin_x, gt.origin_y):
            f.write(f"{v!r}\n")
