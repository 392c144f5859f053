"""PZF with mobility grouping for K = 6 and K_h = 1..5.

Fewer MRT users means less leakage into the ZF group, so the high-mobility
SE grows with K_h while the low-mobility SE barely moves.
Run:  python demos/04_group_size_sweep.py [R]
"""

import sys

from otfs_mimo.experiments import Scenario, sweep_kh

R = int(sys.argv[1]) if len(sys.argv) > 1 else 100
runs = sweep_kh(Scenario(1, 5, scheme="PZF_HL", R=R, snr_grid_db=(0, 10, 20)), range(1, 6), threads=4)

for j, snr in enumerate(runs[0].snr_db):
    print(f"SNR {snr:g} dB")
    for res in runs:
        hi, hi_hw = res.group_mean("high", j)
        lo, lo_hw = res.group_mean("low", j)
        closed = res.se_closed[res.users_in("high")[0], j]
        print(f"  K_h={res.scenario.K_h}: high {hi:.3f} ± {hi_hw:.3f} (closed {closed:.3f})   "
              f"low {lo:.3f} ± {lo_hw:.3f}")
