"""Compiled inner loops for sparse optical flow.

All kernels operate on raw float64 buffers so a whole frame range can be
tracked without returning to Python. Pyramid levels are packed into one 1-D
array with per-frame/per-level offsets (see media.PyramidStack).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _bilinear(px, x, y):
    h, w = px.shape
    if x < 0.0:
        x = 0.0
    elif x > w - 1.0:
        x = w - 1.0
    if y < 0.0:
        y = 0.0
    elif y > h - 1.0:
        y = h - 1.0
    x0 = int(x)
    y0 = int(y)
    if x0 > w - 2:
        x0 = w - 2
    if y0 > h - 2:
        y0 = h - 2
    fx = x - x0
    fy = y - y0
    r0 = px[y0, x0] * (1.0 - fx) + px[y0, x0 + 1] * fx
    r1 = px[y0 + 1, x0] * (1.0 - fx) + px[y0 + 1, x0 + 1] * fx
    return r0 * (1.0 - fy) + r1 * fy


@njit(cache=True, nogil=True)
def _patch_residual(nxt, template, p0x, p0y, dx, dy, win):
    r = win // 2
    s = 0.0
    for j in range(win):
        yy = p0y + (j - r) + dy
        for i in range(win):
            xx = p0x + (i - r) + dx
            s += abs(template[j, i] - _bilinear(nxt, xx, yy))
    return s / (win * win)


@njit(cache=True, nogil=True)
def lk_step_kernel(prev, nxt, p0x, p0y, guessx, guessy, win, max_iters, eps, min_eig):
    """Single-level iterative registration of one point.

    Gauss-Newton on the intensity residual with the template gradient held
    fixed at p0 in `prev`. Returns (x, y, ok, residual); on failure the point
    is the last in-bounds estimate.
    """
    h, w = prev.shape
    xm = w - 1.0
    ym = h - 1.0
    if p0x < 0.0:
        p0x = 0.0
    elif p0x > xm:
        p0x = xm
    if p0y < 0.0:
        p0y = 0.0
    elif p0y > ym:
        p0y = ym
    if guessx < 0.0:
        guessx = 0.0
    elif guessx > xm:
        guessx = xm
    if guessy < 0.0:
        guessy = 0.0
    elif guessy > ym:
        guessy = ym

    r = win // 2
    n = win * win
    template = np.empty((win, win))
    tgx = np.empty((win, win))
    tgy = np.empty((win, win))
    gxx = 0.0
    gxy = 0.0
    gyy = 0.0
    for j in range(win):
        yy = p0y + (j - r)
        for i in range(win):
            xx = p0x + (i - r)
            template[j, i] = _bilinear(prev, xx, yy)
            gx = 0.5 * (_bilinear(prev, xx + 1.0, yy) - _bilinear(prev, xx - 1.0, yy))
            gy = 0.5 * (_bilinear(prev, xx, yy + 1.0) - _bilinear(prev, xx, yy - 1.0))
            tgx[j, i] = gx
            tgy[j, i] = gy
            gxx += gx * gx
            gxy += gx * gy
            gyy += gy * gy

    dx = guessx - p0x
    dy = guessy - p0y
    half_tr = 0.5 * (gxx + gyy)
    det = gxx * gyy - gxy * gxy
    disc = half_tr * half_tr - det
    if disc < 0.0:
        disc = 0.0
    lam_min = (half_tr - math.sqrt(disc)) / n
    if lam_min < min_eig or det <= 0.0:
        res = _patch_residual(nxt, template, p0x, p0y, dx, dy, win)
        return p0x + dx, p0y + dy, False, res

    ok = True
    for _ in range(max_iters):
        bx = 0.0
        by = 0.0
        for j in range(win):
            yy = p0y + (j - r) + dy
            for i in range(win):
                xx = p0x + (i - r) + dx
                diff = template[j, i] - _bilinear(nxt, xx, yy)
                bx += tgx[j, i] * diff
                by += tgy[j, i] * diff
        ddx = (gyy * bx - gxy * by) / det
        ddy = (gxx * by - gxy * bx) / det
        nx = p0x + dx + ddx
        ny = p0y + dy + ddy
        if nx < 0.0 or nx > xm or ny < 0.0 or ny > ym:
            ok = False
            break
        dx += ddx
        dy += ddy
        if math.sqrt(ddx * ddx + ddy * ddy) < eps:
            break

    res = _patch_residual(nxt, template, p0x, p0y, dx, dy, win)
    return p0x + dx, p0y + dy, ok, res


@njit(cache=True, nogil=True)
def pyr_track_kernel(data_a, off_a, data_b, off_b, widths, heights,
                     px, py, win, max_iters, eps, min_eig):
    """Coarse-to-fine refinement across packed pyramid levels."""
    n_levels = widths.shape[0]
    dx = 0.0
    dy = 0.0
    res = 0.0
    for lev in range(n_levels - 1, -1, -1):
        w = widths[lev]
        h = heights[lev]
        size = w * h
        prev = data_a[off_a[lev]:off_a[lev] + size].reshape((h, w))
        nxt = data_b[off_b[lev]:off_b[lev] + size].reshape((h, w))
        scale = 2.0 ** lev
        p0x = px / scale
        p0y = py / scale
        nx, ny, ok, res = lk_step_kernel(prev, nxt, p0x, p0y, p0x + dx, p0y + dy,
                                         win, max_iters, eps, min_eig)
        dx = nx - p0x
        dy = ny - p0y
        if not ok:
            return px + dx * scale, py + dy * scale, False, res
        if lev > 0:
            dx *= 2.0
            dy *= 2.0
    return px + dx, py + dy, True, res


@njit(cache=True, nogil=True)
def chain_kernel(data, offsets, widths, heights, f0, f1, px, py,
                 win, max_iters, eps, min_eig, out_xy, out_ok, out_res):
    """Chain pyramidal steps from frame f0 to f1 (either direction).

    Fills out_* ordered from f0 to f1 inclusive. Once a step is lost, the
    last valid estimate is carried for all remaining frames with ok=False.
    """
    step = 1 if f1 >= f0 else -1
    n = (f1 - f0) * step
    out_xy[0, 0] = px
    out_xy[0, 1] = py
    out_ok[0] = True
    out_res[0] = 0.0
    cx = px
    cy = py
    alive = True
    for k in range(n):
        a = f0 + k * step
        b = a + step
        if alive:
            nx, ny, ok, res = pyr_track_kernel(data, offsets[a], data, offsets[b],
                                               widths, heights, cx, cy,
                                               win, max_iters, eps, min_eig)
            out_res[k + 1] = res
            if ok:
                cx = nx
                cy = ny
            else:
                alive = False
        else:
            out_res[k + 1] = 0.0
        out_xy[k + 1, 0] = cx
        out_xy[k + 1, 1] = cy
        out_ok[k + 1] = alive
