# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loops in ``_purepy``; same signatures."""

from libc.math cimport sin, cos, asin, sqrt, M_PI
from libc.stdlib cimport malloc, free

BACKEND = "cython"


cdef inline bint _worse(double s1, long long d1, double s2, long long d2):
    return s1 < s2 or (s1 == s2 and d1 > d2)


cdef void _sift_down(double *hs, long long *hd, Py_ssize_t n, Py_ssize_t i):
    # min-heap on "worseness": the worst kept doc sits at index 0
    cdef Py_ssize_t c, w
    cdef double ts
    cdef long long td
    while True:
        w = i
        c = 2 * i + 1
        if c < n and _worse(hs[c], hd[c], hs[w], hd[w]):
            w = c
        c += 1
        if c < n and _worse(hs[c], hd[c], hs[w], hd[w]):
            w = c
        if w == i:
            return
        ts = hs[i]; hs[i] = hs[w]; hs[w] = ts
        td = hd[i]; hd[i] = hd[w]; hd[w] = td
        i = w


cdef void _sift_up(double *hs, long long *hd, Py_ssize_t i):
    cdef Py_ssize_t p
    cdef double ts
    cdef long long td
    while i > 0:
        p = (i - 1) // 2
        if not _worse(hs[i], hd[i], hs[p], hd[p]):
            return
        ts = hs[i]; hs[i] = hs[p]; hs[p] = ts
        td = hd[i]; hd[i] = hd[p]; hd[p] = td
        i = p


def bm25_topk(postings, double[::1] doc_lengths, double avg_doc_length, double k1,
              double b, int[::1] doc_country, int country, Py_ssize_t depth):
    return _run(postings, doc_lengths, avg_doc_length, k1, b, doc_country, country, depth)


def bm25_accumulate(postings, double[::1] doc_lengths, double avg_doc_length,
                    double k1, double b):
    return _run(postings, doc_lengths, avg_doc_length, k1, b, None, -1, -1)


cdef _run(postings, double[::1] doc_lengths, double avg_doc_length, double k1, double b,
          int[::1] doc_country, int country, Py_ssize_t depth):
    cdef Py_ssize_t k = len(postings)
    cdef Py_ssize_t i, j, total = 0
    cdef long long d, best
    cdef double acc, tf, norm, k1p1 = k1 + 1.0
    cdef long long[::1] docs
    cdef int[::1] tfs
    out_docs = []
    out_scores = []
    if k == 0:
        return out_docs, out_scores

    cdef long long **doc_ptr = <long long **> malloc(k * sizeof(long long *))
    cdef int **tf_ptr = <int **> malloc(k * sizeof(int *))
    cdef Py_ssize_t *length = <Py_ssize_t *> malloc(k * sizeof(Py_ssize_t))
    cdef Py_ssize_t *pos = <Py_ssize_t *> malloc(k * sizeof(Py_ssize_t))
    cdef double *idf = <double *> malloc(k * sizeof(double))
    cdef Py_ssize_t cap = depth if depth > 0 else 1
    cdef double *heap_s = <double *> malloc(cap * sizeof(double))
    cdef long long *heap_d = <long long *> malloc(cap * sizeof(long long))
    cdef Py_ssize_t heap_n = 0
    cdef bint bounded = depth > 0
    cdef bint filtered = country >= 0 and doc_country is not None
    # keep buffers alive while raw pointers are in use
    held = []
    try:
        for i in range(k):
            docs_obj, tfs_obj, idf_obj = postings[i]
            docs = docs_obj
            tfs = tfs_obj
            if docs.shape[0] != tfs.shape[0]:
                raise ValueError("postings arrays must have equal length")
            held.append((docs, tfs))
            length[i] = docs.shape[0]
            pos[i] = 0
            idf[i] = idf_obj
            if length[i] > 0:
                doc_ptr[i] = &docs[0]
                tf_ptr[i] = &tfs[0]
        while True:
            best = -1
            for i in range(k):
                if pos[i] < length[i]:
                    d = doc_ptr[i][pos[i]]
                    if best < 0 or d < best:
                        best = d
            if best < 0:
                break
            acc = 0.0
            norm = k1 * (1.0 - b + b * doc_lengths[best] / avg_doc_length)
            for i in range(k):
                if pos[i] < length[i] and doc_ptr[i][pos[i]] == best:
                    tf = tf_ptr[i][pos[i]]
                    acc = acc + idf[i] * (tf * k1p1) / (tf + norm)
                    pos[i] += 1
            if filtered and doc_country[best] != country:
                continue
            if not bounded:
                out_docs.append(best)
                out_scores.append(acc)
            elif heap_n < depth:
                heap_s[heap_n] = acc
                heap_d[heap_n] = best
                _sift_up(heap_s, heap_d, heap_n)
                heap_n += 1
            elif _worse(heap_s[0], heap_d[0], acc, best):
                heap_s[0] = acc
                heap_d[0] = best
                _sift_down(heap_s, heap_d, heap_n, 0)
        if bounded:
            ranked = sorted([(-heap_s[i], heap_d[i]) for i in range(heap_n)])
            out_docs = [d for _, d in ranked]
            out_scores = [-s for s, _ in ranked]
    finally:
        free(heap_s)
        free(heap_d)
        free(doc_ptr)
        free(tf_ptr)
        free(length)
        free(pos)
        free(idf)
    return out_docs, out_scores


def haversine_batch(double[::1] lat1, double[::1] lon1, double[::1] lat2,
                    double[::1] lon2, double radius):
    cdef Py_ssize_t n = lat1.shape[0], i
    if lon1.shape[0] != n or lat2.shape[0] != n or lon2.shape[0] != n:
        raise ValueError("coordinate arrays must have equal length")
    cdef double rad = M_PI / 180.0
    cdef double p1, p2, dp, dl, s1, s2, a
    out = [0.0] * n
    for i in range(n):
        p1 = lat1[i] * rad
        p2 = lat2[i] * rad
        dp = (lat2[i] - lat1[i]) * rad
        dl = (lon2[i] - lon1[i]) * rad
        s1 = sin(dp * 0.5)
        s2 = sin(dl * 0.5)
        a = s1 * s1 + cos(p1) * cos(p2) * s2 * s2
        if a > 1.0:
            a = 1.0
        out[i] = 2.0 * radius * asin(sqrt(a))
    return out
