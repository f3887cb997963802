"""Inner integration loop for the plant simulator.

The 16-node energy-balance system (12 fluid nodes, 4 heater sheaths) is
advanced with classic RK4.  This is the hot path — a 1-hour scenario takes
~150k right-hand-side evaluations — so the loop ships as a numba build and
an identical pure-Python build (see :mod:`triloop._accel`).

State vector layout (float64, length 16):
  0-4   TF11..TF15  primary loop, flow order TF11>TF12>TF13>TF14>TF15>TF11
  5-9   TF21..TF25  secondary loop, flow order TF21>..>TF25>TF21
  10-11 TF31, TF32  heat-sink loop, flow order TF31>TF32>TF31
  12-15 TH1..TH4    heater sheath nodes

Couplings: heater sheaths feed the test-section outlet node (TF12); HX1
moves heat from the TF14 node into the TF22 node; HX2 from TF24 into TF32;
the sink conductance pulls TF31 toward ambient.  Rod position moves toward
its target at a fixed slew rate and is evaluated analytically at each RK4
stage time, so integration accuracy does not depend on when the rod
reaches its target.
"""

import numpy as np

from ._accel import HAS_NUMBA, USE_NUMBA


def _build(jit):
    """Build (rhs, advance) pair, optionally jitted."""

    def rod_at(r0, r_tgt, slew, elapsed):
        # Piecewise-linear rod trajectory: slew-limited approach to target.
        move = slew * elapsed
        d = r_tgt - r0
        if d > move:
            return r0 + move
        if d < -move:
            return r0 - move
        return r_tgt

    def hx_q(t_hot, t_cold, c_hot, c_cold, ua):
        # Counter-flow effectiveness-NTU heat rate, W.
        if c_hot <= 0.0 or c_cold <= 0.0 or ua <= 0.0:
            return 0.0
        if c_hot < c_cold:
            c_min = c_hot
            c_max = c_cold
        else:
            c_min = c_cold
            c_max = c_hot
        cr = c_min / c_max
        ntu = ua / c_min
        if cr > 1.0 - 1e-12:
            eff = ntu / (1.0 + ntu)
        else:
            e = np.exp(-ntu * (1.0 - cr))
            eff = (1.0 - e) / (1.0 - cr * e)
        return eff * c_min * (t_hot - t_cold)

    def rhs(T, q_e_w, mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual, dT):
        q1 = hx_q(T[3], T[5], mcp1, mcp2, ua1)    # HX1: TF14 hot in, TF21 cold in
        q2 = hx_q(T[8], T[10], mcp2, mcp3, ua2)   # HX2: TF24 hot in, TF31 cold in

        q_sheath = 0.0
        for j in range(4):
            q_sheath += ha_per * (T[12 + j] - T[1])

        # Primary loop (nodes 0..4): heat in at TF12, out at TF15.
        for i in range(5):
            up = i - 1 if i > 0 else 4
            q = 0.0
            if i == 1:
                q = q_sheath
            elif i == 4:
                q = -q1
            dT[i] = (mcp1 * (T[up] - T[i]) + q - ual[i] * (T[i] - amb)) / C[i]

        # Secondary loop (nodes 5..9): heat in at TF22, out at TF25.
        for i in range(5, 10):
            up = i - 1 if i > 5 else 9
            q = 0.0
            if i == 6:
                q = q1
            elif i == 9:
                q = -q2
            dT[i] = (mcp2 * (T[up] - T[i]) + q - ual[i] * (T[i] - amb)) / C[i]

        # Heat-sink loop (nodes 10, 11): heat in at TF32; the sink conductance
        # on TF31 is folded into ual[10].
        dT[10] = (mcp3 * (T[11] - T[10]) - ual[10] * (T[10] - amb)) / C[10]
        dT[11] = (mcp3 * (T[10] - T[11]) + q2 - ual[11] * (T[11] - amb)) / C[11]

        # Sheath nodes (12..15): electrical input, first-order lag to TF12.
        for j in range(4):
            i = 12 + j
            dT[i] = (0.25 * q_e_w - ha_per * (T[i] - T[1])) / C[i]

    def advance(T, r0, r_tgt, slew, q_full_w, n_sub, dt,
                mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual):
        """Advance T in place over n_sub RK4 substeps of dt; return final rod position.

        q_full_w is the electrical power (W) the heater bank would deliver at
        rod factor 1 (i.e. quantized command fraction x max power); the
        instantaneous power is q_full_w * (1 - rod/100).
        """
        k1 = np.empty(16)
        k2 = np.empty(16)
        k3 = np.empty(16)
        k4 = np.empty(16)
        Ts = np.empty(16)

        for s in range(n_sub):
            el = s * dt
            q0 = q_full_w * (1.0 - rod_at(r0, r_tgt, slew, el) / 100.0)
            qh = q_full_w * (1.0 - rod_at(r0, r_tgt, slew, el + 0.5 * dt) / 100.0)
            q1t = q_full_w * (1.0 - rod_at(r0, r_tgt, slew, el + dt) / 100.0)

            rhs(T, q0, mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual, k1)
            for i in range(16):
                Ts[i] = T[i] + 0.5 * dt * k1[i]
            rhs(Ts, qh, mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual, k2)
            for i in range(16):
                Ts[i] = T[i] + 0.5 * dt * k2[i]
            rhs(Ts, qh, mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual, k3)
            for i in range(16):
                Ts[i] = T[i] + dt * k3[i]
            rhs(Ts, q1t, mcp1, mcp2, mcp3, ua1, ua2, ha_per, amb, C, ual, k4)
            for i in range(16):
                T[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

        return rod_at(r0, r_tgt, slew, n_sub * dt)

    if jit is not None:
        # Rebind the helpers to their jitted builds; `advance` and `rhs`
        # resolve these closure names lazily at first compilation, so the
        # whole call tree compiles as native code.
        rod_at = jit(rod_at)
        hx_q = jit(hx_q)
        rhs = jit(rhs)
        advance = jit(advance)
    return advance


advance_numpy = _build(None)
if HAS_NUMBA:
    from numba import njit

    advance_numba = _build(njit(cache=True))
else:
    advance_numba = None

advance = advance_numba if USE_NUMBA else advance_numpy
