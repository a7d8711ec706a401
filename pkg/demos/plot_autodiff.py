"""
Gradients from the tensor engine
================================

Build a small conv -> relu -> loss graph, check the gradients against
central differences and take a few Adam steps.
"""

import numpy as np

from nsrkit import engine as E

rng = np.random.default_rng(0)

# A batch of one 2-channel 6x6 image and a 3x3 kernel bank with 4 outputs.
# float64 arrays keep the whole graph in double precision.
x = E.Tensor(rng.standard_normal((1, 2, 6, 6)))
w = E.Parameter(rng.standard_normal((4, 2, 3, 3)) * 0.3, name="w")
b = E.Parameter(np.zeros(4), name="b")
target = E.Tensor(rng.random((1, 4, 6, 6)))


def loss_fn():
    return E.mae_loss(E.relu(E.conv2d(x, w, b, padding=1)), target)


loss = loss_fn()
E.backward(loss)
print("loss", loss.item())

# Finite differences on a handful of weights
h = 1e-3
for idx in [(0, 0, 1, 1), (2, 1, 0, 2), (3, 0, 2, 2)]:
    orig = w.data[idx]
    w.data[idx] = orig + h
    with E.no_grad():
        up = loss_fn().item()
    w.data[idx] = orig - h
    with E.no_grad():
        down = loss_fn().item()
    w.data[idx] = orig
    print(idx, "autodiff %.6f  numeric %.6f" % (w.grad[idx], (up - down) / (2 * h)))

# A few optimizer steps; grads are cleared by adam_step
state = E.AdamState(lr=1e-2)
for step in range(5):
    w.grad = b.grad = None
    loss = loss_fn()
    E.backward(loss)
    E.adam_step([w, b], state)
    print("step", step, "loss %.5f" % loss.item())

# pixel shuffle moves channel blocks onto a finer grid
t = E.Tensor(np.arange(4.0).reshape(1, 4, 1, 1))
print(E.pixel_shuffle(t, 2).data[0, 0])
