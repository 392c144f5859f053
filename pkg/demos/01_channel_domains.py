"""Walk through one user's channel in the four equivalent domains.

Run from the repository root:  python demos/01_channel_domains.py
"""

import numpy as np

from otfs_mimo.channel import Domain, GridDims, all_domain_channels, draw_user_channel, dump_paths

dims = GridDims(8, 8, 100)          # M = N = 8, 100 antennas, CP = ceil(0.2 * 64) = 13
print(f"grid {dims.M}x{dims.N}, Nt={dims.Nt}, MN={dims.MN}, Lcp={dims.Lcp}")

# One high-mobility user with two paths. The draw is fully determined by the generator.
rng = np.random.default_rng(2024)
user = draw_user_channel(rng, "high", dims, P=2, l_max=4, k_max=4.0, aoa_prior="uniform_sine")
print(dump_paths([user]))

# The TD channel is sum_i theta_i kron (h_i Pi^l_i Delta^k_i): a 64 x 6400 matrix.
ch = all_domain_channels(user)
for dom in Domain:
    print(f"{dom.value:>8}: shape {ch[dom].shape}, ||H||_F = {np.linalg.norm(ch[dom].mat):.6f}")

# The DD, TF and the two cross-domain channels are unitary sandwiches of the TD
# channel, so they share its singular values.
ref = np.linalg.svd(ch[Domain.TD].mat, compute_uv=False)
for dom in (Domain.DD, Domain.TF, Domain.CROSS_DD, Domain.CROSS_TF):
    sv = np.linalg.svd(ch[dom].mat, compute_uv=False)
    print(f"max singular-value difference TD vs {dom.value}: {np.max(np.abs(sv - ref)):.2e}")

# With integer Doppler the DD channel of a single antenna would be a sparse
# permutation-like matrix; fractional Doppler spreads it along the Doppler axis.
dd = ch[Domain.DD].mat[:, :dims.MN]
print("fraction of DD energy in the 5% largest entries (antenna 0):",
      round(float(np.sort(np.abs(dd).ravel() ** 2)[::-1][: dd.size // 20].sum() / np.sum(np.abs(dd) ** 2)), 3))
