"""A small deficit sweep that runs in well under a minute.

Bulk constants are supplied and the surface tension is isotropic, so the
only expensive step is canonical sampling.  Use ``droplet sweep --config
demos/sweep.toml`` for the full-size run at L=64.
"""

from droplet.experiment import ExperimentConfig, run_sweep

cfg = ExperimentConfig(
    beta=0.7, L=32, delta_values=(0.3, 1.0, 2.0, 3.0), delta_units="delta_c", K=1.5,
    tau_source="constant", tau0=0.9, bulk_source="provided", m_star=0.9902, chi=0.0276,
    chains=4, sweeps=4000, thermalization=1000, stride=50, n_directions=512, bootstrap=200,
)
res = run_sweep(cfg)
print(f"s = {cfg.s:.2f}")
print(f"{'delta':>7} {'v_L':>7} {'theory':>7} {'median':>7} {'droplet':>8} {'A':>6} {'B':>6}")
for r in res.rows:
    print(f"{r['delta']:7.3f} {r['v_L']:7.1f} {r['lambda_theory']:7.3f} {r['lambda_hat_median']:7.3f} "
          f"{r['frac_droplet']:8.3f} {r['frac_A']:6.3f} {r['frac_B']:6.3f}")
