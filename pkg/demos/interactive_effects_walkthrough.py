"""Why within estimators break under interactive effects, and what to use.

Simulates a panel whose unobserved heterogeneity is a factor structure
z_i' f_t correlated with the regressor, then compares the two-way within
slope against the estimators built for this setting.
"""

import numpy as np

from panelfx import (
    DGPSpec,
    IlsOptions,
    ccep_estimate,
    fe_estimate,
    ils_estimate,
    pnnr_estimate,
    simulate,
    tsiv_estimate,
)

spec = DGPSpec(
    N=100, T=100, K=1, beta=(1.0,),
    heterogeneity="ife", m=2,
    loading_regressor_correlation=0.5,
    seed=42,
)
panel, truth = simulate(spec)
print(f"panel: N={panel.n_units}, T={panel.n_periods}, true beta = {truth.beta}")

# the within estimator sweeps out additive effects only; the factor part
# that correlates with x stays in the error and tilts the slope
twfe = fe_estimate(panel)
print(f"\ntwo-way within : {twfe.beta[0]:+.4f}  (bias {twfe.beta[0] - 1:+.4f})")

ils, _ = ils_estimate(panel, IlsOptions(m=2))
print(f"ils, m=2       : {ils.beta[0]:+.4f}  "
      f"({ils.iterations} iterations, converged={ils.converged})")

ccep = ccep_estimate(panel)
print(f"ccep           : {ccep.beta[0]:+.4f}  (flags {ccep.flags or 'none'})")

tsiv = tsiv_estimate(panel)
print(f"tsiv           : {tsiv.beta[0]:+.4f}  (m_x={tsiv.details['m_x']})")

pnnr, _ = pnnr_estimate(panel)
print(f"pnnr           : {pnnr.beta[0]:+.4f}  (picked m={pnnr.m_used})")

# the ILS objective never goes up across sweeps; the tail of the path
# shows how quickly the alternation settles
ssr = np.asarray(ils.ssr_path)
print(f"\nils ssr path, last five sweeps: {np.array2string(ssr[-5:], precision=6)}")
print(f"relative drop over the run: {(ssr[0] - ssr[-1]) / ssr[0]:.2%}")
