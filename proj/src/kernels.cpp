#include "onnseg/kernels.hpp"

#include <algorithm>

// Reference kernels. Plain nested loops, one output element at a time, with
// the per-element accumulation order (i, r, t) that the OpenMP kernels must
// reproduce exactly.

namespace onnseg::kern {

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace {

inline void conv2d_fwd_one(const double* x, const double* w, const double* bias,
                           double* y, const ConvDims& d, int n, int o) {
    const std::int64_t xplane = static_cast<std::int64_t>(d.h) * d.w;
    const double* xn = x + static_cast<std::int64_t>(n) * d.cin * xplane;
    const double* wo = w + static_cast<std::int64_t>(o) * d.cin * d.kh * d.kw;
    double* yo = y + (static_cast<std::int64_t>(n) * d.cout + o) * d.hout * d.wout;
    const double b = bias ? bias[o] : 0.0;
    for (int oh = 0; oh < d.hout; ++oh) {
        const int ih0 = oh * d.stride - d.pad;
        const int rlo = std::max(0, -ih0);
        const int rhi = std::min(d.kh, d.h - ih0);
        for (int ow = 0; ow < d.wout; ++ow) {
            const int iw0 = ow * d.stride - d.pad;
            const int tlo = std::max(0, -iw0);
            const int thi = std::min(d.kw, d.w - iw0);
            double acc = b;
            for (int i = 0; i < d.cin; ++i) {
                const double* xi = xn + i * xplane;
                const double* wi = wo + static_cast<std::int64_t>(i) * d.kh * d.kw;
                for (int r = rlo; r < rhi; ++r) {
                    const double* xrow = xi + static_cast<std::int64_t>(ih0 + r) * d.w + iw0;
                    const double* wrow = wi + static_cast<std::int64_t>(r) * d.kw;
                    for (int t = tlo; t < thi; ++t)
                        acc += wrow[t] * xrow[t];
                }
            }
            yo[static_cast<std::int64_t>(oh) * d.wout + ow] = acc;
        }
    }
}

inline void conv2d_bwd_input_one(const double* gy, const double* w, double* gx,
                                 const ConvDims& d, int n, int i) {
    const std::int64_t yplane = static_cast<std::int64_t>(d.hout) * d.wout;
    const double* gyn = gy + static_cast<std::int64_t>(n) * d.cout * yplane;
    double* gxi = gx + (static_cast<std::int64_t>(n) * d.cin + i) * d.h * d.w;
    for (int ih = 0; ih < d.h; ++ih) {
        for (int iw = 0; iw < d.w; ++iw) {
            double acc = 0.0;
            for (int o = 0; o < d.cout; ++o) {
                const double* gyo = gyn + o * yplane;
                const double* wo = w + ((static_cast<std::int64_t>(o) * d.cin + i) * d.kh) * d.kw;
                for (int r = 0; r < d.kh; ++r) {
                    const int num = ih + d.pad - r;
                    if (num < 0 || num % d.stride != 0) continue;
                    const int oh = num / d.stride;
                    if (oh >= d.hout) continue;
                    for (int t = 0; t < d.kw; ++t) {
                        const int numw = iw + d.pad - t;
                        if (numw < 0 || numw % d.stride != 0) continue;
                        const int ow = numw / d.stride;
                        if (ow >= d.wout) continue;
                        acc += wo[r * d.kw + t] * gyo[static_cast<std::int64_t>(oh) * d.wout + ow];
                    }
                }
            }
            gxi[static_cast<std::int64_t>(ih) * d.w + iw] += acc;
        }
    }
}

inline void conv2d_bwd_weight_one(const double* gy, const double* x, double* gw,
                                  const ConvDims& d, int o, int i) {
    const std::int64_t xplane = static_cast<std::int64_t>(d.h) * d.w;
    const std::int64_t yplane = static_cast<std::int64_t>(d.hout) * d.wout;
    double* gwio = gw + ((static_cast<std::int64_t>(o) * d.cin + i) * d.kh) * d.kw;
    for (int r = 0; r < d.kh; ++r) {
        for (int t = 0; t < d.kw; ++t) {
            double acc = 0.0;
            for (int n = 0; n < d.n; ++n) {
                const double* xi = x + (static_cast<std::int64_t>(n) * d.cin + i) * xplane;
                const double* gyo = gy + (static_cast<std::int64_t>(n) * d.cout + o) * yplane;
                for (int oh = 0; oh < d.hout; ++oh) {
                    const int ih = oh * d.stride - d.pad + r;
                    if (ih < 0 || ih >= d.h) continue;
                    for (int ow = 0; ow < d.wout; ++ow) {
                        const int iw = ow * d.stride - d.pad + t;
                        if (iw < 0 || iw >= d.w) continue;
                        acc += gyo[static_cast<std::int64_t>(oh) * d.wout + ow] *
                               xi[static_cast<std::int64_t>(ih) * d.w + iw];
                    }
                }
            }
            gwio[r * d.kw + t] += acc;
        }
    }
}

inline void conv2d_bwd_bias_one(const double* gy, double* gb, const ConvDims& d, int o) {
    const std::int64_t yplane = static_cast<std::int64_t>(d.hout) * d.wout;
    double acc = 0.0;
    for (int n = 0; n < d.n; ++n) {
        const double* gyo = gy + (static_cast<std::int64_t>(n) * d.cout + o) * yplane;
        for (std::int64_t k = 0; k < yplane; ++k)
            acc += gyo[k];
    }
    gb[o] += acc;
}

inline void bn_stats_one(const double* x, int n, int c, int h, int w, double* mean,
                         double* var, int ci) {
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t m = static_cast<std::int64_t>(n) * plane;
    double s = 0.0;
    for (int ni = 0; ni < n; ++ni) {
        const double* xc = x + (static_cast<std::int64_t>(ni) * c + ci) * plane;
        for (std::int64_t k = 0; k < plane; ++k)
            s += xc[k];
    }
    const double mu = s / static_cast<double>(m);
    double sq = 0.0;
    for (int ni = 0; ni < n; ++ni) {
        const double* xc = x + (static_cast<std::int64_t>(ni) * c + ci) * plane;
        for (std::int64_t k = 0; k < plane; ++k) {
            const double dlt = xc[k] - mu;
            sq += dlt * dlt;
        }
    }
    mean[ci] = mu;
    var[ci] = sq / static_cast<double>(m);
}

} // namespace

void conv2d_fwd_serial(const double* x, const double* w, const double* bias, double* y,
                       const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int o = 0; o < d.cout; ++o)
            conv2d_fwd_one(x, w, bias, y, d, n, o);
}

void conv2d_bwd_input_serial(const double* gy, const double* w, double* gx, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int i = 0; i < d.cin; ++i)
            conv2d_bwd_input_one(gy, w, gx, d, n, i);
}

void conv2d_bwd_weight_serial(const double* gy, const double* x, double* gw, double* gb,
                              const ConvDims& d) {
    for (int o = 0; o < d.cout; ++o)
        for (int i = 0; i < d.cin; ++i)
            conv2d_bwd_weight_one(gy, x, gw, d, o, i);
    if (gb)
        for (int o = 0; o < d.cout; ++o)
            conv2d_bwd_bias_one(gy, gb, d, o);
}

void bn_stats_serial(const double* x, int n, int c, int h, int w, double* mean, double* var) {
    for (int ci = 0; ci < c; ++ci)
        bn_stats_one(x, n, c, h, w, mean, var, ci);
}

void conv2d_fwd_omp(const double* x, const double* w, const double* bias, double* y,
                    const ConvDims& d) {
    const int total = d.n * d.cout;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < total; ++k)
        conv2d_fwd_one(x, w, bias, y, d, k / d.cout, k % d.cout);
}

void conv2d_bwd_input_omp(const double* gy, const double* w, double* gx, const ConvDims& d) {
    const int total = d.n * d.cin;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < total; ++k)
        conv2d_bwd_input_one(gy, w, gx, d, k / d.cin, k % d.cin);
}

void conv2d_bwd_weight_omp(const double* gy, const double* x, double* gw, double* gb,
                           const ConvDims& d) {
    const int total = d.cout * d.cin;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < total; ++k)
        conv2d_bwd_weight_one(gy, x, gw, d, k / d.cin, k % d.cin);
    if (gb) {
#pragma omp parallel for schedule(static)
        for (int o = 0; o < d.cout; ++o)
            conv2d_bwd_bias_one(gy, gb, d, o);
    }
}

void bn_stats_omp(const double* x, int n, int c, int h, int w, double* mean, double* var) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci)
        bn_stats_one(x, n, c, h, w, mean, var, ci);
}

namespace {
Engine g_engine = Engine::OpenMP;
}

Engine engine() { return g_engine; }
void set_engine(Engine e) { g_engine = e; }

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y,
                const ConvDims& d) {
    if (g_engine == Engine::OpenMP)
        conv2d_fwd_omp(x, w, bias, y, d);
    else
        conv2d_fwd_serial(x, w, bias, y, d);
}

void conv2d_bwd_input(const double* gy, const double* w, double* gx, const ConvDims& d) {
    if (g_engine == Engine::OpenMP)
        conv2d_bwd_input_omp(gy, w, gx, d);
    else
        conv2d_bwd_input_serial(gy, w, gx, d);
}

void conv2d_bwd_weight(const double* gy, const double* x, double* gw, double* gb,
                       const ConvDims& d) {
    if (g_engine == Engine::OpenMP)
        conv2d_bwd_weight_omp(gy, x, gw, gb, d);
    else
        conv2d_bwd_weight_serial(gy, x, gw, gb, d);
}

void bn_stats(const double* x, int n, int c, int h, int w, double* mean, double* var) {
    if (g_engine == Engine::OpenMP)
        bn_stats_omp(x, n, c, h, w, mean, var);
    else
        bn_stats_serial(x, n, c, h, w, mean, var);
}

} // namespace onnseg::kern
