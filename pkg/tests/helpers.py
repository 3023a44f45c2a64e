"""Shared test utilities: synthetic clouds and a central-difference checker."""

import numpy as np
import torch


def sphere_cloud(n, radius=0.18, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * d


def cube_cloud(n, half=0.1, seed=0):
    """Uniform samples on the surface of an axis-aligned cube."""
    rng = np.random.default_rng(seed)
    face = rng.integers(0, 6, n)
    uv = rng.uniform(-half, half, (n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for i in range(3):
        m = axis == i
        pts[m, i] = sign[m] * half
        others = [j for j in range(3) if j != i]
        pts[np.ix_(m, others)] = uv[m]
    return pts


def box_with_holes(seed, n=12000):
    """Axis-aligned box surface with a few spherical chunks punched out.

    The holes give each shape structure that is visible from some viewpoints
    and hidden from others.
    """
    rng = np.random.default_rng(seed)
    half = rng.uniform(0.5, 1.0, 3)
    face = rng.integers(0, 6, n)
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for i in range(3):
        m = axis == i
        pts[m, i] = sign[m] * half[i]
        others = [j for j in range(3) if j != i]
        pts[np.ix_(m, others)] = rng.uniform(-1, 1, (int(m.sum()), 2)) * half[others]
    for _ in range(int(rng.integers(2, 4))):
        anchor = pts[rng.integers(pts.shape[0])]
        hole_r = rng.uniform(0.25, 0.45) * half.min()
        pts = pts[np.linalg.norm(pts - anchor, axis=1) > hole_r]
    return pts


def _cube_faces(rng, half, n, center=(0.0, 0.0, 0.0)):
    face = rng.integers(0, 6, n)
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for i in range(3):
        m = axis == i
        pts[m, i] = sign[m] * half
        others = [j for j in range(3) if j != i]
        pts[np.ix_(m, others)] = rng.uniform(-half, half, (int(m.sum()), 2))
    return pts + np.asarray(center)


def nested_cube(seed, n_outer=12000, n_inner=6000):
    """Fixed outer cube with punched holes and a randomly placed inner cube.

    The inner cube is hidden behind the outer surface from most viewpoints
    and shows through the holes from others, so the views of one shape carry
    genuinely different information.
    """
    rng = np.random.default_rng(seed)
    outer = _cube_faces(rng, 1.0, n_outer)
    for _ in range(4):
        f = rng.integers(0, 6)
        ax, sg = f // 2, 1.0 if f % 2 == 0 else -1.0
        anchor = np.zeros(3)
        anchor[ax] = sg
        others = [j for j in range(3) if j != ax]
        anchor[others] = rng.uniform(-0.35, 0.35, 2)
        outer = outer[np.linalg.norm(outer - anchor, axis=1) > rng.uniform(0.35, 0.45)]
    inner = _cube_faces(rng, rng.uniform(0.3, 0.55), n_inner, center=rng.uniform(-0.3, 0.3, 3))
    return np.concatenate([outer, inner])


def central_difference_check(make_loss, params, n_samples=20, h=1e-5, seed=0):
    """Worst relative error between backprop and central differences over
    `n_samples` randomly probed entries of each parameter tensor."""
    loss = make_loss()
    for p in params:
        p.grad = None
    loss.backward()
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for p in params:
        flat = p.data.view(-1)
        grad = p.grad.view(-1) if p.grad is not None else torch.zeros_like(flat)
        k = min(n_samples, flat.numel())
        for i in torch.randperm(flat.numel(), generator=gen)[:k]:
            orig = flat[i].item()
            flat[i] = orig + h
            up = make_loss().item()
            flat[i] = orig - h
            down = make_loss().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            bp = grad[i].item()
            worst = max(worst, abs(fd - bp) / max(abs(fd), abs(bp), 1e-8))
    return worst


def input_gradient_check(fn, x, n_samples=20, h=1e-5, seed=0):
    """Central-difference check of d fn(x) / dx at sampled entries of x."""
    x = x.detach().clone().requires_grad_(True)
    fn(x).backward()
    grad = x.grad.view(-1)
    flat = x.data.view(-1)
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    k = min(n_samples, flat.numel())
    for i in torch.randperm(flat.numel(), generator=gen)[:k]:
        orig = flat[i].item()
        flat[i] = orig + h
        up = fn(x).item()
        flat[i] = orig - h
        down = fn(x).item()
        flat[i] = orig
        fd = (up - down) / (2.0 * h)
        worst = max(worst, abs(fd - grad[i].item()) / max(abs(fd), abs(grad[i].item()), 1e-8))
    return worst
