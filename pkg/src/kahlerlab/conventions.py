"""Normalization and sign conventions, collected in one place.

Metric and volume
    On a chart with total potential ``Phi`` the metric components are
    ``g_{i jbar} = d_i dbar_j Phi``.  The Kahler form used for volumes and
    characteristic numbers is ``omega = (i / 2 pi) g_{i jbar} dz^i ^ dzbar^j``,
    so ``[omega] = c_1(O(1))`` for ``Phi = log(1 + |z|^2)`` and
    ``int_{CP^1} omega = 1``.  The volume form is ``omega^n / n! =
    det(g) / pi^n`` times Lebesgue measure on the chart.

Curvature
    ``R_{i jbar k lbar} = -d_k dbar_l g_{i jbar} + g^{qbar p} d_k g_{i qbar} dbar_l g_{p jbar}``,
    ``Ric_{i jbar} = g^{lbar k} R_{k lbar i jbar} = -d_i dbar_j log det g`` and
    ``S = g^{jbar i} Ric_{i jbar}``.  Round CP^n has ``R = c (g g + g g)`` with
    ``c = 1 / scale`` and ``S = n (n + 1) / scale``; round CP^1 has ``S = 2``.
    Norms contract every index with the inverse metric:
    ``|Ric|^2 = Ric_{i jbar} Ric_{p qbar} g^{jbar p} g^{qbar i}`` and ``|R|^2``
    likewise with four inverse metrics.

Laplacian
    ``Delta f = g^{jbar i} d_i dbar_j f`` (non-positive spectrum; equals the
    round unit-sphere Laplacian on round CP^1).

Line bundle
    ``L^k`` carries the weight ``exp(-k Phi)`` in the affine trivialization.
    Its Chern connection is ``nabla s = ds - k (d Phi) s``, with curvature
    ``-i k omega_symp`` where ``omega_symp = i ddbar Phi = 2 pi omega``.
    Hamiltonian vector fields use ``omega_symp``: ``df = iota_{X_f} omega_symp``,
    which gives ``X_f^i = -i g^{jbar i} dbar_j f``.

Bergman density
    ``rho_k = sum |e_a|^2 exp(-k Phi)`` for an L^2-orthonormal basis with
    respect to ``omega^n / n!``.  It satisfies ``int rho_k omega^n/n! = dim H^0``
    and ``rho_k = k^n + (S/2) k^(n-1) + ...`` with no extra constants.

Variational sign
    Along ``Phi_t = Phi + t psi``:
    ``d/dt log det Gram = -int psi (k rho_k - Delta rho_k) omega^n / n!``.

Densities
    ``Z_0 = 1``, ``n Z_1 = S / 2``,
    ``n (n-1) Z_2 = -(1/6) Delta S + (1/24)(|R|^2 - 4 |Ric|^2 + 3 S^2)``.
    Integrals of ``Z_j`` are taken against ``omega^n`` (not ``omega^n / n!``)
    when compared with ``int Td_j [omega]^(n-j)``.
"""

import math

# omega_symp = SYMPLECTIC_FACTOR * omega
SYMPLECTIC_FACTOR = 2.0 * math.pi

# sign s in  d/dt log det Gram = s * int psi (k rho_k - Delta rho_k) omega^n/n!
DONALDSON_SIGN = -1.0

# Calabi-type flow d(phi)/dt = FLOW_SIGN * (Z_j - mean); decreases the energy for j = 1, 2
FLOW_SIGN = 1.0

# ratio (a_1 / S); the Bergman density needs no rescaling in these conventions
A1_OVER_S = 0.5
