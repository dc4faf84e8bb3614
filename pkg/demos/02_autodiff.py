"""The reverse-mode autodiff core: graphs, gradients, and verification.

Every model in this package is built from a small set of float64 numpy
ops, each carrying an explicit backward closure. `finite_diff_check`
compares any op's analytic gradient against central differences.
"""
import numpy as np

from gesturegen import autodiff as ad

rng = np.random.default_rng(0)

print("== a tiny computation graph ==")
w = ad.tensor(rng.normal(0, 0.5, (3, 2)))
x = ad.tensor(rng.normal(0, 1, (4, 3)))
loss = ad.huber_loss(ad.silu(ad.matmul(x, w)) - 1.0)
print(f"loss = {loss.value:.4f}")
loss.backward()
print(f"dloss/dw:\n{np.round(w.grad, 4)}")

print("\n== gradient verification ==")
conv_kernel = ad.tensor(rng.normal(0, 1, (3, 4)))
for name, op, shape in [
    ("layer_norm", lambda t: ad.layer_norm(t, ad.tensor(np.ones(6)),
                                           ad.tensor(np.zeros(6))), (4, 6)),
    ("softmax", ad.softmax, (3, 5)),
    ("attention", lambda t: ad.scaled_dot_attention(t, t, t), (5, 4)),
    ("causal conv", lambda t: ad.causal_depthwise_conv(
        t, conv_kernel, ad.tensor(np.zeros(4))), (7, 4)),
]:
    err = ad.finite_diff_check(op, rng.normal(0, 1, shape))
    print(f"{name:12s} max rel error vs central differences: {err:.2e}")

print("\n== broadcasting-aware gradients ==")
bias = ad.tensor(np.zeros(4))
out = ad.tensor(rng.normal(0, 1, (6, 4))) + bias
out.sum().backward()
print(f"gradient of a (6,4)+(4,) broadcast sums rows: {bias.grad}")
