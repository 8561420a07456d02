"""Self-interference cancellation at a 60 dB interference-to-noise ratio.

The near-end receiver knows what it transmitted; an adaptive estimate of
the self-interference channel drives an FIR replica that is subtracted
from the received stream. On a static channel the residual reaches the
ambient noise floor; on a time-varying channel the cancellation depth is
set by the estimator's tracking ability.
"""

import numpy as np

from fduwa import adaptive, channel, receiver
from fduwa.coding import prbs

n, L, M = 8000, 50, 1001

for variation, kw in (("static", {}), ("polynomial", {"poly_depth": 0.3})):
    spec = channel.ChannelModelSpec(
        length=L, delays=(0, 5, 12, 26, 40), gains_db=(0, -4, -8, -12, -16),
        variation=variation, seed=5, rate_hz=4e3, **kw,
    )
    ch = channel.synthesize_channel(spec, n)
    near = prbs(11, n)
    mx = channel.mix(channel.apply_channel(near, ch), np.zeros(n),
                     channel.MixSpec(si_to_noise_db=60.0, far_snr_db=None), seed=3)

    swin = adaptive.SlidingWindowConfig(filter_length=L, window_length=M,
                                        stride=100, regularization=1e-8)
    bem = adaptive.BemConfig(filter_length=L, order=2, window_length=M, stride=250)

    print(f"{variation} SI channel, SI-to-noise 60 dB:")
    for name, est in (
        ("SRLSd", adaptive.srlsd_estimate(mx.received, near, swin)),
        ("HSRLS-L-DCD", adaptive.hsrls_l_dcd_estimate(mx.received, near, bem,
                                                      adaptive.HomotopyConfig())),
    ):
        sic = receiver.si_cancel(mx.received, near, est, si_truth=mx.si_component)
        over = 10 * np.log10(np.mean(np.abs(sic.residual) ** 2) / mx.noise_power)
        print(f"  {name:12s}: depth {sic.depth_db:5.1f} dB, residual "
              f"{over:+5.2f} dB relative to the noise floor")
