"""Compiled inner loops: finite-segment fields, Jacobians, trajectory integration.

Segments are packed as float64 rows [start(3), unit direction(3), length,
mu0*I/(4*pi)].  The segment field uses a cancellation-free arrangement of the
closed-form finite-filament expression so it stays accurate arbitrarily close
to the wire and near the extended axis.
"""

import numpy as np
from numba import njit, prange

WIRE_EPS = 1.0e-9  # m, hard singularity guard around each filament
_AXIS_RHO2 = 1.0e-60  # m^2, squared distance treated as exactly on-axis

# trajectory fate codes
FATE_LEFT = 0
FATE_RIGHT = 1
FATE_BACK = 2
FATE_LOST_SURFACE = 3
FATE_LOST_ESCAPE = 4
FATE_TIMEOUT = 5


@njit(cache=True)
def field_into(packed, bias, px, py, pz, B):
    """Total field at one point into B (3,); returns min squared distance to a segment."""
    bx = bias[0]
    by = bias[1]
    bz = bias[2]
    mind2 = 1.0e300
    for k in range(packed.shape[0]):
        sx = packed[k, 0]
        sy = packed[k, 1]
        sz = packed[k, 2]
        ux = packed[k, 3]
        uy = packed[k, 4]
        uz = packed[k, 5]
        ln = packed[k, 6]
        f = packed[k, 7]

        ax = px - sx
        ay = py - sy
        az = pz - sz
        t = ax * ux + ay * uy + az * uz
        s = ln - t
        # c = u x a, |c| = perpendicular distance to the segment axis
        cx = uy * az - uz * ay
        cy = uz * ax - ux * az
        cz = ux * ay - uy * ax
        rho2 = cx * cx + cy * cy + cz * cz
        na = np.sqrt(ax * ax + ay * ay + az * az)
        bxv = ax - ln * ux
        byv = ay - ln * uy
        bzv = az - ln * uz
        nb = np.sqrt(bxv * bxv + byv * byv + bzv * bzv)

        if t < 0.0:
            d2 = na * na
        elif t > ln:
            d2 = nb * nb
        else:
            d2 = rho2
        if d2 < mind2:
            mind2 = d2

        if rho2 < _AXIS_RHO2 or f == 0.0:
            continue

        # stable residuals: alpha = na - |t|, beta = nb - |s|
        alpha = rho2 / (na + abs(t))
        beta = rho2 / (nb + abs(s))
        p = alpha if t >= 0.0 else 2.0 * (-t) + alpha  # na - t
        q = beta if s >= 0.0 else 2.0 * (-s) + beta  # nb - s
        a1 = 2.0 * s + q - p  # L - na + nb
        a2 = 2.0 * t + p - q  # L + na - nb
        w = f * (na + nb) * a1 * a2 / (2.0 * ln * na * nb * rho2)
        bx += w * cx
        by += w * cy
        bz += w * cz
    B[0] = bx
    B[1] = by
    B[2] = bz
    return mind2


@njit(cache=True)
def field_jac_into(packed, bias, px, py, pz, B, J):
    """Field and its analytic Jacobian J[i, j] = dB_i/dx_j at one point.

    The bias is homogeneous and contributes nothing to J.  Returns min squared
    distance to a segment.
    """
    for i in range(3):
        B[i] = bias[i]
        for j in range(3):
            J[i, j] = 0.0
    mind2 = 1.0e300
    for k in range(packed.shape[0]):
        sx = packed[k, 0]
        sy = packed[k, 1]
        sz = packed[k, 2]
        ux = packed[k, 3]
        uy = packed[k, 4]
        uz = packed[k, 5]
        ln = packed[k, 6]
        f = packed[k, 7]

        ax = px - sx
        ay = py - sy
        az = pz - sz
        t = ax * ux + ay * uy + az * uz
        s = ln - t
        cx = uy * az - uz * ay
        cy = uz * ax - ux * az
        cz = ux * ay - uy * ax
        rho2 = cx * cx + cy * cy + cz * cz
        na = np.sqrt(ax * ax + ay * ay + az * az)
        bxv = ax - ln * ux
        byv = ay - ln * uy
        bzv = az - ln * uz
        nb = np.sqrt(bxv * bxv + byv * byv + bzv * bzv)

        if t < 0.0:
            d2 = na * na
        elif t > ln:
            d2 = nb * nb
        else:
            d2 = rho2
        if d2 < mind2:
            mind2 = d2

        if rho2 < _AXIS_RHO2 or f == 0.0:
            continue

        alpha = rho2 / (na + abs(t))
        beta = rho2 / (nb + abs(s))
        p = alpha if t >= 0.0 else 2.0 * (-t) + alpha
        q = beta if s >= 0.0 else 2.0 * (-s) + beta
        a1 = 2.0 * s + q - p
        a2 = 2.0 * t + p - q
        S = (na + nb) * a1 * a2 / (2.0 * ln * na * nb)  # cos(theta1) - cos(theta2)
        w = f * S / rho2
        B[0] += w * cx
        B[1] += w * cy
        B[2] += w * cz

        # grad S = grad cos1 - grad cos2
        na3 = na * na * na
        nb3 = nb * nb * nb
        g0 = ux / na - t * ax / na3 - (ux / nb - (t - ln) * bxv / nb3)
        g1 = uy / na - t * ay / na3 - (uy / nb - (t - ln) * byv / nb3)
        g2 = uz / na - t * az / na3 - (uz / nb - (t - ln) * bzv / nb3)
        # perpendicular vector rho_vec = a - t u; grad(rho2) = 2 rho_vec
        rx = ax - t * ux
        ry = ay - t * uy
        rz = az - t * uz

        fr = f / rho2
        fr2 = 2.0 * f * S / (rho2 * rho2)
        # J += f [ c (x) gradS / rho2 + S skew(u)/rho2 - 2 S c (x) rho_vec / rho2^2 ]
        J[0, 0] += fr * cx * g0 - fr2 * cx * rx
        J[0, 1] += fr * (cx * g1 - S * uz) - fr2 * cx * ry
        J[0, 2] += fr * (cx * g2 + S * uy) - fr2 * cx * rz
        J[1, 0] += fr * (cy * g0 + S * uz) - fr2 * cy * rx
        J[1, 1] += fr * cy * g1 - fr2 * cy * ry
        J[1, 2] += fr * (cy * g2 - S * ux) - fr2 * cy * rz
        J[2, 0] += fr * (cz * g0 - S * uy) - fr2 * cz * rx
        J[2, 1] += fr * (cz * g1 + S * ux) - fr2 * cz * ry
        J[2, 2] += fr * cz * g2 - fr2 * cz * rz
    return mind2


@njit(cache=True, parallel=True)
def field_batch(packed, bias, points, out_b, out_d2):
    for i in prange(points.shape[0]):
        b = np.empty(3)
        out_d2[i] = field_into(packed, bias, points[i, 0], points[i, 1], points[i, 2], b)
        out_b[i, 0] = b[0]
        out_b[i, 1] = b[1]
        out_b[i, 2] = b[2]


@njit(cache=True, parallel=True)
def field_jac_batch(packed, bias, points, out_b, out_j, out_d2):
    for i in prange(points.shape[0]):
        b = np.empty(3)
        j = np.empty((3, 3))
        out_d2[i] = field_jac_into(packed, bias, points[i, 0], points[i, 1], points[i, 2], b, j)
        for r in range(3):
            out_b[i, r] = b[r]
            for c in range(3):
                out_j[i, r, c] = j[r, c]


@njit(cache=True)
def _norm3(x, y, z):
    return np.sqrt(x * x + y * y + z * z)


@njit(cache=True, fastmath=True)
def _field_grad_norm(packed, bias, px, py, pz, buf, out):
    """One-point B and g = J^T B (the |B| gradient direction) without forming J.

    Two passes over the segments: the first accumulates B and caches the
    per-segment geometry in ``buf`` (n_seg, 11), the second contracts each
    segment's Jacobian with the total B.  Fills out[0:3] = B, out[3:6] = g;
    returns min squared distance to a segment.
    """
    bx = bias[0]
    by = bias[1]
    bz = bias[2]
    mind2 = 1.0e300
    m = packed.shape[0]
    for k in range(m):
        sx = packed[k, 0]
        sy = packed[k, 1]
        sz = packed[k, 2]
        ux = packed[k, 3]
        uy = packed[k, 4]
        uz = packed[k, 5]
        ln = packed[k, 6]
        f = packed[k, 7]

        ax = px - sx
        ay = py - sy
        az = pz - sz
        t = ax * ux + ay * uy + az * uz
        s = ln - t
        cx = uy * az - uz * ay
        cy = uz * ax - ux * az
        cz = ux * ay - uy * ax
        rho2 = cx * cx + cy * cy + cz * cz
        na = np.sqrt(ax * ax + ay * ay + az * az)
        bvx = ax - ln * ux
        bvy = ay - ln * uy
        bvz = az - ln * uz
        nb = np.sqrt(bvx * bvx + bvy * bvy + bvz * bvz)

        if t < 0.0:
            d2 = na * na
        elif t > ln:
            d2 = nb * nb
        else:
            d2 = rho2
        if d2 < mind2:
            mind2 = d2

        if rho2 < _AXIS_RHO2 or f == 0.0:
            buf[k, 10] = 0.0
            continue

        alpha = rho2 / (na + abs(t))
        beta = rho2 / (nb + abs(s))
        p = alpha if t >= 0.0 else 2.0 * (-t) + alpha
        q = beta if s >= 0.0 else 2.0 * (-s) + beta
        a1 = 2.0 * s + q - p
        a2 = 2.0 * t + p - q
        S = (na + nb) * a1 * a2 / (2.0 * ln * na * nb)
        w = f * S / rho2
        bx += w * cx
        by += w * cy
        bz += w * cz

        na3 = na * na * na
        nb3 = nb * nb * nb
        tm = t - ln
        buf[k, 0] = cx
        buf[k, 1] = cy
        buf[k, 2] = cz
        buf[k, 3] = ux / na - t * ax / na3 - (ux / nb - tm * bvx / nb3)
        buf[k, 4] = uy / na - t * ay / na3 - (uy / nb - tm * bvy / nb3)
        buf[k, 5] = uz / na - t * az / na3 - (uz / nb - tm * bvz / nb3)
        buf[k, 6] = ax - t * ux
        buf[k, 7] = ay - t * uy
        buf[k, 8] = az - t * uz
        buf[k, 9] = S
        buf[k, 10] = rho2

    gx = 0.0
    gy = 0.0
    gz = 0.0
    for k in range(m):
        rho2 = buf[k, 10]
        if rho2 == 0.0:
            continue
        f = packed[k, 7]
        ux = packed[k, 3]
        uy = packed[k, 4]
        uz = packed[k, 5]
        cb = buf[k, 0] * bx + buf[k, 1] * by + buf[k, 2] * bz
        S = buf[k, 9]
        w1 = f * cb / rho2
        w2 = f * S / rho2
        w3 = 2.0 * f * S * cb / (rho2 * rho2)
        # skew(u)^T B = -u x B
        uxb_x = uy * bz - uz * by
        uxb_y = uz * bx - ux * bz
        uxb_z = ux * by - uy * bx
        gx += w1 * buf[k, 3] - w2 * uxb_x - w3 * buf[k, 6]
        gy += w1 * buf[k, 4] - w2 * uxb_y - w3 * buf[k, 7]
        gz += w1 * buf[k, 5] - w2 * uxb_z - w3 * buf[k, 8]
    out[0] = bx
    out[1] = by
    out[2] = bz
    out[3] = gx
    out[4] = gy
    out[5] = gz
    return mind2


@njit(cache=True, parallel=True)
def propagate_batch(
    packed,
    bias,
    pos,
    vel,
    moment,
    mass,
    gravity,
    dt,
    t_max,
    z_floor,
    x_detect,
    x_back,
    y_max,
    z_max,
    capture_radius,
    left_y,
    left_z,
    left_on,
    right_y,
    right_z,
    right_on,
    fate_out,
    pos_out,
    vel_out,
    minb_out,
    time_out,
    maxx_out,
):
    """Velocity-Verlet transport of independent atoms under F = -mu grad|B|.

    The base step dt is halved (up to 6 times) whenever the velocity change
    per step would exceed 1% of the current speed, which only triggers in the
    stiff junction region.  Atoms terminate on the first of: arm detection
    plane, back plane, chip surface z <= z_floor or wire impact, leaving the
    bounding box, or t_max.  With ``capture_radius > 0`` a plane crossing only
    scores Left/Right if the atom lies within that radius of an enabled
    arm-guide centre; unguided fly-bys score as escapes.  With
    ``capture_radius <= 0`` the sign of y alone decides.
    """
    n = pos.shape[0]
    n_seg = packed.shape[0]
    eps2 = WIRE_EPS * WIRE_EPS
    for i in prange(n):
        buf = np.empty((n_seg, 11))
        bg = np.empty(6)
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        vx = vel[i, 0]
        vy = vel[i, 1]
        vz = vel[i, 2]

        mind2 = _field_grad_norm(packed, bias, x, y, z, buf, bg)
        bn = _norm3(bg[0], bg[1], bg[2])
        minb = bn
        maxx = x
        bn_safe = bn if bn > 1.0e-300 else 1.0e-300
        cf = -moment / (mass * bn_safe)
        ax = cf * bg[3]
        ay = cf * bg[4]
        az = cf * bg[5] - gravity

        t = 0.0
        fate = FATE_TIMEOUT
        while t < t_max:
            amag = _norm3(ax, ay, az)
            vmag = _norm3(vx, vy, vz) + 1.0e-30
            dts = dt
            halvings = 0
            while amag * dts > 0.01 * vmag and halvings < 6:
                dts *= 0.5
                halvings += 1

            vhx = vx + 0.5 * dts * ax
            vhy = vy + 0.5 * dts * ay
            vhz = vz + 0.5 * dts * az
            x += dts * vhx
            y += dts * vhy
            z += dts * vhz

            mind2 = _field_grad_norm(packed, bias, x, y, z, buf, bg)
            bn = _norm3(bg[0], bg[1], bg[2])
            if bn < minb:
                minb = bn
            bn_safe = bn if bn > 1.0e-300 else 1.0e-300
            cf = -moment / (mass * bn_safe)
            ax = cf * bg[3]
            ay = cf * bg[4]
            az = cf * bg[5] - gravity

            vx = vhx + 0.5 * dts * ax
            vy = vhy + 0.5 * dts * ay
            vz = vhz + 0.5 * dts * az
            t += dts
            if x > maxx:
                maxx = x

            if z <= z_floor or mind2 < eps2:
                fate = FATE_LOST_SURFACE
                break
            if x >= x_detect:
                if capture_radius <= 0.0:
                    fate = FATE_LEFT if y > 0.0 else FATE_RIGHT
                else:
                    fate = FATE_LOST_ESCAPE
                    if left_on and (y - left_y) ** 2 + (z - left_z) ** 2 <= capture_radius**2:
                        fate = FATE_LEFT
                    elif right_on and (y - right_y) ** 2 + (z - right_z) ** 2 <= capture_radius**2:
                        fate = FATE_RIGHT
                break
            if x < x_back:
                fate = FATE_BACK
                break
            if abs(y) > y_max or z > z_max:
                fate = FATE_LOST_ESCAPE
                break

        fate_out[i] = fate
        pos_out[i, 0] = x
        pos_out[i, 1] = y
        pos_out[i, 2] = z
        vel_out[i, 0] = vx
        vel_out[i, 1] = vy
        vel_out[i, 2] = vz
        minb_out[i] = minb
        time_out[i] = t
        maxx_out[i] = maxx


@njit(cache=True)
def integrate_energy_track(packed, bias, pos0, vel0, moment, mass, dt, n_steps, stride):
    """Fixed-step velocity-Verlet on a smooth stretch, recording total energy.

    Returns energies sampled every ``stride`` steps (index 0 = initial state).
    No adaptive halving here: this is the symplectic-drift diagnostic.
    """
    B = np.empty(3)
    J = np.empty((3, 3))
    x = pos0[0]
    y = pos0[1]
    z = pos0[2]
    vx = vel0[0]
    vy = vel0[1]
    vz = vel0[2]

    n_samples = n_steps // stride + 1
    energies = np.empty(n_samples)

    field_jac_into(packed, bias, x, y, z, B, J)
    bn = _norm3(B[0], B[1], B[2])
    energies[0] = 0.5 * mass * (vx * vx + vy * vy + vz * vz) + moment * bn
    cf = -moment / (mass * bn)
    ax = cf * (J[0, 0] * B[0] + J[1, 0] * B[1] + J[2, 0] * B[2])
    ay = cf * (J[0, 1] * B[0] + J[1, 1] * B[1] + J[2, 1] * B[2])
    az = cf * (J[0, 2] * B[0] + J[1, 2] * B[1] + J[2, 2] * B[2])

    idx = 1
    for step in range(1, n_steps + 1):
        vhx = vx + 0.5 * dt * ax
        vhy = vy + 0.5 * dt * ay
        vhz = vz + 0.5 * dt * az
        x += dt * vhx
        y += dt * vhy
        z += dt * vhz
        field_jac_into(packed, bias, x, y, z, B, J)
        bn = _norm3(B[0], B[1], B[2])
        cf = -moment / (mass * bn)
        ax = cf * (J[0, 0] * B[0] + J[1, 0] * B[1] + J[2, 0] * B[2])
        ay = cf * (J[0, 1] * B[0] + J[1, 1] * B[1] + J[2, 1] * B[2])
        az = cf * (J[0, 2] * B[0] + J[1, 2] * B[1] + J[2, 2] * B[2])
        vx = vhx + 0.5 * dt * ax
        vy = vhy + 0.5 * dt * ay
        vz = vhz + 0.5 * dt * az
        if step % stride == 0:
            energies[idx] = 0.5 * mass * (vx * vx + vy * vy + vz * vz) + moment * bn
            idx += 1
    return energies
