#!/usr/bin/env python3
"""A tour of the tape: record an expression, differentiate it, audit it.

Everything downstream (attention, the full network, training) rides on the
same three moves shown here: open a tape, compute a scalar loss, call
backward. The last section plants a wrong gradient on purpose and shows the
finite-difference checker catching it.
"""

import numpy as np

import haat.autograd as ag
from haat.autograd import GradTape, Tensor, backward, negate_gradient
from haat.verification import gradcheck


def banner(text):
    print(f"\n=== {text} ===")


banner("forward math looks like numpy")
a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32), requires_grad=True)
b = Tensor(np.array([[0.5], [-1.0]], dtype=np.float32), requires_grad=True)
print("a @ b =", ag.matmul(a, b).numpy().ravel())

banner("gradients come from a tape")
with GradTape() as tape:
    y = ag.matmul(a, b)          # (2, 1)
    loss = ag.sum_all(ag.mul(y, y))
backward(loss, tape)
print("loss        =", float(loss.numpy()))
print("d loss / da =\n", a.grad)
print("d loss / db =\n", b.grad)

# hand check one entry: loss = sum_i (a_i . b)^2, so d/da[0,0] = 2 (a_0 . b) b_0
y0 = float(np.dot(a.numpy()[0], b.numpy().ravel()))
print("hand value for da[0,0]:", 2.0 * y0 * float(b.numpy()[0, 0]))

banner("grads accumulate until you clear them")
a.grad = None
b.grad = None
for _ in range(3):
    with GradTape() as tape:
        loss = ag.sum_all(ag.matmul(a, b))
    backward(loss, tape)
print("after three backwards, da[0,0] =", a.grad[0, 0], "(three times the one-pass value)")

banner("the checker compares every gradient with central differences")
for name in ("matmul", "softmax", "layer_norm", "conv2d"):
    print(gradcheck(name).line())

banner("a planted sign bug does not slip past it")
with negate_gradient("matmul"):
    print(gradcheck("matmul").line())
