# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled molecule-tracking kernel.

Draws come straight from the generator's ``bitgen_t`` in the same order as
the pure-Python fallback, so both backends return identical counts for the
same generator state.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport floor, sqrt
from libc.string cimport memset
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (binomial_t, random_binomial,
                                           random_standard_normal)


cdef inline void _track(bitgen_t *bg, double rho, double t, bint locate, long long *row,
                        long long first, long long n_local, double t_end,
                        double r, double diffusion, double T, double t0, long M) nogil:
    # k is the local index of the last sample taken; -1 before the first one
    cdef double u, z, o, ts, s, x, y, w
    cdef long long j, m, k = -1, kn
    while True:
        if rho > r:
            u = bg.next_double(bg.state)
            if u * rho >= r:
                return
            z = random_standard_normal(bg)
            if z == 0.0:
                return
            t = t + (rho - r) * (rho - r) / (2.0 * diffusion * z * z)
            rho = r
            locate = True
        if locate:
            # first sample strictly after the arrival time t
            locate = False
            if t >= t_end:
                return
            j = <long long> floor(t / T)
            o = t - j * T
            m = <long long> floor(o / t0)
            if m < 0:
                m = 0
            if m >= M:
                j = j + 1
                m = 0
            kn = j * M + m
            if kn <= k:
                kn = k + 1
        else:
            kn = k + 1
        k = kn
        if k >= n_local:
            return
        ts = (k // M) * T + (k % M + 1) * t0
        s = ts - t
        if s < 0.0:
            s = 0.0
        s = sqrt(2.0 * diffusion * s)
        x = rho + s * random_standard_normal(bg)
        y = s * random_standard_normal(bg)
        w = s * random_standard_normal(bg)
        rho = sqrt(x * x + y * y + w * w)
        t = ts
        if rho <= r:
            row[first + k] += 1


def radial_counts(rng, long long[:, ::1] counts, double[::1] dist, double[::1] radius,
                  long n_mol, long emit_interval, double diffusion, double T, double t0, long M):
    """Add the sample counts caused by one impulse of ``n_mol`` molecules.

    ``counts[o, s]`` is the count at observer ``o`` for global sample ``s``
    (``s = interval * M + m``, both 0-based).  The impulse is released at the
    start of 0-based interval ``emit_interval``.  ``dist[o]`` is the distance
    from the release point to the centre of observer ``o``; zero means the
    emitter observes its own release.  Each observer is tracked on its own
    set of molecules, which leaves every observer's count law exact.
    """
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")
    cdef binomial_t bstate
    cdef Py_ssize_t o, n_obs = counts.shape[0]
    cdef long long n_samples = counts.shape[1]
    cdef long long first = emit_interval * M
    cdef long long n_local = n_samples - first
    cdef long long n_intervals = n_samples // M
    cdef double t_end = (n_intervals - emit_interval) * T
    cdef double d0, r, z, t
    cdef long i, n_hit
    cdef long long *row
    if n_mol <= 0 or n_local <= 0:
        return
    memset(&bstate, 0, sizeof(bstate))
    with rng.bit_generator.lock:
        for o in range(n_obs):
            d0 = dist[o]
            r = radius[o]
            row = &counts[o, 0]
            if d0 > r:
                n_hit = random_binomial(bg, r / d0, n_mol, &bstate)
                for i in range(n_hit):
                    z = random_standard_normal(bg)
                    if z == 0.0:
                        continue
                    t = (d0 - r) * (d0 - r) / (2.0 * diffusion * z * z)
                    _track(bg, r, t, True, row, first, n_local, t_end, r, diffusion, T, t0, M)
            else:
                for i in range(n_mol):
                    _track(bg, d0, 0.0, False, row, first, n_local, t_end, r, diffusion, T, t0, M)
