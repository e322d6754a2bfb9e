#include "onnseg/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "onnseg/kernels.hpp"

namespace onnseg {

void Tape::record(TensorPtr out, std::function<void()> fn) {
    recs_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const TensorPtr& loss) {
    if (recs_.empty())
        throw ContractError("Tape::backward: tape is empty");
    if (!loss->is_scalar())
        throw ContractError("Tape::backward: loss has shape " + loss->shape.str() +
                            ", expected scalar (1,1,1,1)");
    for (auto& r : recs_) {
        r.out->ensure_grad();
        r.out->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = recs_.rbegin(); it != recs_.rend(); ++it)
        it->fn();
}

void Tape::clear() {
    recs_.clear();
}

namespace {

TensorPtr make_out(Shape4 s, bool needs_grad) {
    auto t = Tensor::zeros(s);
    t->requires_grad = needs_grad;
    t->tape_node = needs_grad;
    return t;
}

bool wants_grad(const TensorPtr& t) { return t && t->requires_grad; }

} // namespace

BatchNormState BatchNormState::make(int channels) {
    BatchNormState bn;
    bn.gamma = Tensor::full({1, channels, 1, 1}, 1.0, true);
    bn.beta = Tensor::zeros({1, channels, 1, 1}, true);
    bn.running_mean = Tensor::zeros({1, channels, 1, 1});
    bn.running_var = Tensor::full({1, channels, 1, 1}, 1.0);
    return bn;
}

TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int pad) {
    if (x->shape.c != w->shape.c)
        throw DimensionError("conv2d: input " + x->shape.str() + " has " +
                             std::to_string(x->shape.c) + " channels but kernel " +
                             w->shape.str() + " expects " + std::to_string(w->shape.c));
    if (b && (b->shape.c != w->shape.n || b->shape.n != 1 || b->shape.h != 1 || b->shape.w != 1))
        throw DimensionError("conv2d: bias " + b->shape.str() + " does not match " +
                             std::to_string(w->shape.n) + " output channels");
    kern::ConvDims d;
    d.n = x->shape.n;
    d.cin = x->shape.c;
    d.h = x->shape.h;
    d.w = x->shape.w;
    d.cout = w->shape.n;
    d.kh = w->shape.h;
    d.kw = w->shape.w;
    d.stride = stride;
    d.pad = pad;
    d.hout = kern::conv_out_extent(d.h, d.kh, stride, pad);
    d.wout = kern::conv_out_extent(d.w, d.kw, stride, pad);
    if (d.hout <= 0 || d.wout <= 0)
        throw DimensionError("conv2d: non-positive output dims for input " + x->shape.str() +
                             " and kernel " + w->shape.str() + " (stride " +
                             std::to_string(stride) + ", pad " + std::to_string(pad) + ")");

    const bool ng = wants_grad(x) || wants_grad(w) || wants_grad(b);
    auto out = make_out({d.n, d.cout, d.hout, d.wout}, ng);
    kern::conv2d_fwd(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                     out->data.data(), d);
    if (!ng) return out;

    TensorPtr xc = x, wc = w, bc = b, oc = out;
    tape.record(out, [xc, wc, bc, oc, d]() {
        if (xc->requires_grad) {
            xc->ensure_grad();
            kern::conv2d_bwd_input(oc->grad.data(), wc->data.data(), xc->grad.data(), d);
        }
        if (wc->requires_grad || (bc && bc->requires_grad)) {
            double* gw = nullptr;
            double* gb = nullptr;
            if (wc->requires_grad) {
                wc->ensure_grad();
                gw = wc->grad.data();
            }
            if (bc && bc->requires_grad) {
                bc->ensure_grad();
                gb = bc->grad.data();
            }
            if (gw)
                kern::conv2d_bwd_weight(oc->grad.data(), xc->data.data(), gw, gb, d);
            else if (gb) {
                // bias-only gradient
                const std::int64_t plane = static_cast<std::int64_t>(d.hout) * d.wout;
                for (int o = 0; o < d.cout; ++o) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n) {
                        const double* g = oc->grad.data() +
                                          (static_cast<std::int64_t>(n) * d.cout + o) * plane;
                        for (std::int64_t k = 0; k < plane; ++k) acc += g[k];
                    }
                    gb[o] += acc;
                }
            }
        }
    });
    return out;
}

TensorPtr batchnorm2d(Tape& tape, const TensorPtr& x, BatchNormState& bn, bool training) {
    const int C = x->shape.c;
    if (C != bn.channels())
        throw DimensionError("batchnorm2d: input " + x->shape.str() + " vs state with " +
                             std::to_string(bn.channels()) + " channels");
    const int N = x->shape.n, H = x->shape.h, W = x->shape.w;
    const std::int64_t m = static_cast<std::int64_t>(N) * H * W;

    auto mean = std::make_shared<std::vector<double>>(C);
    auto invstd = std::make_shared<std::vector<double>>(C);
    if (training) {
        if (m < 2)
            throw DegenerateStatisticsError(
                "batchnorm2d: train-mode statistics need N*H*W >= 2, got " + std::to_string(m) +
                " for input " + x->shape.str());
        std::vector<double> var(C);
        kern::bn_stats(x->data.data(), N, C, H, W, mean->data(), var.data());
        for (int c = 0; c < C; ++c) {
            (*invstd)[c] = 1.0 / std::sqrt(var[c] + bn.eps);
            const double unbiased = var[c] * static_cast<double>(m) / static_cast<double>(m - 1);
            bn.running_mean->data[c] =
                (1.0 - bn.momentum) * bn.running_mean->data[c] + bn.momentum * (*mean)[c];
            bn.running_var->data[c] =
                (1.0 - bn.momentum) * bn.running_var->data[c] + bn.momentum * unbiased;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            (*mean)[c] = bn.running_mean->data[c];
            (*invstd)[c] = 1.0 / std::sqrt(bn.running_var->data[c] + bn.eps);
        }
    }

    const bool ng = wants_grad(x) || wants_grad(bn.gamma) || wants_grad(bn.beta);
    auto out = make_out(x->shape, ng);
    auto xhat = std::make_shared<std::vector<double>>(x->data.size());
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
        const int c = static_cast<int>(nc % C);
        const std::int64_t base = nc * plane;
        const double mu = (*mean)[c], is = (*invstd)[c];
        const double g = bn.gamma->data[c], be = bn.beta->data[c];
        for (std::int64_t k = 0; k < plane; ++k) {
            const double xh = (x->data[base + k] - mu) * is;
            (*xhat)[base + k] = xh;
            out->data[base + k] = g * xh + be;
        }
    });
    if (!ng) return out;

    TensorPtr xc = x, gamma = bn.gamma, beta = bn.beta, oc = out;
    tape.record(out, [xc, gamma, beta, oc, xhat, invstd, training, N, C, H, W]() {
        const std::int64_t plane = static_cast<std::int64_t>(H) * W;
        const std::int64_t m = static_cast<std::int64_t>(N) * plane;
        if (xc->requires_grad) xc->ensure_grad();
        if (gamma->requires_grad) gamma->ensure_grad();
        if (beta->requires_grad) beta->ensure_grad();
        kern::parallel_for(C, [&](std::int64_t ci) {
            const int c = static_cast<int>(ci);
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int n = 0; n < N; ++n) {
                const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
                for (std::int64_t k = 0; k < plane; ++k) {
                    const double gy = oc->grad[base + k];
                    sum_gy += gy;
                    sum_gy_xhat += gy * (*xhat)[base + k];
                }
            }
            if (gamma->requires_grad) gamma->grad[c] += sum_gy_xhat;
            if (beta->requires_grad) beta->grad[c] += sum_gy;
            if (xc->requires_grad) {
                const double g_is = gamma->data[c] * (*invstd)[c];
                if (training) {
                    const double mean_gy = sum_gy / static_cast<double>(m);
                    const double mean_gy_xhat = sum_gy_xhat / static_cast<double>(m);
                    for (int n = 0; n < N; ++n) {
                        const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
                        for (std::int64_t k = 0; k < plane; ++k) {
                            const double gy = oc->grad[base + k];
                            xc->grad[base + k] +=
                                g_is * (gy - mean_gy - (*xhat)[base + k] * mean_gy_xhat);
                        }
                    }
                } else {
                    for (int n = 0; n < N; ++n) {
                        const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
                        for (std::int64_t k = 0; k < plane; ++k)
                            xc->grad[base + k] += g_is * oc->grad[base + k];
                    }
                }
            }
        });
    });
    return out;
}

TensorPtr activation(Tape& tape, const TensorPtr& x, Act kind) {
    const bool ng = wants_grad(x);
    auto out = make_out(x->shape, ng);
    const std::int64_t n = x->numel();
    switch (kind) {
    case Act::Relu:
        kern::parallel_for(n, [&](std::int64_t i) {
            out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
        });
        break;
    case Act::Sigmoid:
        kern::parallel_for(n, [&](std::int64_t i) {
            out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
        });
        break;
    case Act::Tanh:
        kern::parallel_for(n, [&](std::int64_t i) { out->data[i] = std::tanh(x->data[i]); });
        break;
    }
    if (!ng) return out;

    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc, kind, n]() {
        xc->ensure_grad();
        switch (kind) {
        case Act::Relu:
            kern::parallel_for(n, [&](std::int64_t i) {
                if (xc->data[i] > 0.0) xc->grad[i] += oc->grad[i];
            });
            break;
        case Act::Sigmoid:
            kern::parallel_for(n, [&](std::int64_t i) {
                const double s = oc->data[i];
                xc->grad[i] += s * (1.0 - s) * oc->grad[i];
            });
            break;
        case Act::Tanh:
            kern::parallel_for(n, [&](std::int64_t i) {
                const double t = oc->data[i];
                xc->grad[i] += (1.0 - t * t) * oc->grad[i];
            });
            break;
        }
    });
    return out;
}

TensorPtr pool_global(Tape& tape, const TensorPtr& x, PoolKind kind) {
    const int N = x->shape.n, C = x->shape.c;
    const std::int64_t plane = static_cast<std::int64_t>(x->shape.h) * x->shape.w;
    const bool ng = wants_grad(x);
    auto out = make_out({N, C, 1, 1}, ng);
    auto argmax = kind == PoolKind::Max
                      ? std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(N) * C)
                      : nullptr;
    kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
        const double* p = x->data.data() + nc * plane;
        if (kind == PoolKind::Avg) {
            double s = 0.0;
            for (std::int64_t k = 0; k < plane; ++k) s += p[k];
            out->data[nc] = s / static_cast<double>(plane);
        } else {
            std::int64_t best = 0;
            for (std::int64_t k = 1; k < plane; ++k)
                if (p[k] > p[best]) best = k; // strict >, so ties keep the first index
            out->data[nc] = p[best];
            (*argmax)[nc] = nc * plane + best;
        }
    });
    if (!ng) return out;

    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc, kind, argmax, N, C, plane]() {
        xc->ensure_grad();
        if (kind == PoolKind::Avg) {
            kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
                const double g = oc->grad[nc] / static_cast<double>(plane);
                double* gp = xc->grad.data() + nc * plane;
                for (std::int64_t k = 0; k < plane; ++k) gp[k] += g;
            });
        } else {
            for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(N) * C; ++nc)
                xc->grad[(*argmax)[nc]] += oc->grad[nc];
        }
    });
    return out;
}

TensorPtr pool2d(Tape& tape, const TensorPtr& x, PoolKind kind, int k, int stride, int pad) {
    const int N = x->shape.n, C = x->shape.c, H = x->shape.h, W = x->shape.w;
    const int Ho = kern::conv_out_extent(H, k, stride, pad);
    const int Wo = kern::conv_out_extent(W, k, stride, pad);
    if (Ho <= 0 || Wo <= 0)
        throw DimensionError("pool2d: non-positive output dims for input " + x->shape.str());
    const bool ng = wants_grad(x);
    auto out = make_out({N, C, Ho, Wo}, ng);
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
    const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
    auto argmax = kind == PoolKind::Max
                      ? std::make_shared<std::vector<std::int64_t>>(out->data.size())
                      : nullptr;
    kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
        const double* ip = x->data.data() + nc * iplane;
        double* op = out->data.data() + nc * oplane;
        for (int oh = 0; oh < Ho; ++oh) {
            for (int ow = 0; ow < Wo; ++ow) {
                const int h0 = oh * stride - pad, w0 = ow * stride - pad;
                if (kind == PoolKind::Avg) {
                    double s = 0.0;
                    for (int r = std::max(0, -h0); r < std::min(k, H - h0); ++r)
                        for (int t = std::max(0, -w0); t < std::min(k, W - w0); ++t)
                            s += ip[static_cast<std::int64_t>(h0 + r) * W + (w0 + t)];
                    op[static_cast<std::int64_t>(oh) * Wo + ow] = s / (k * k);
                } else {
                    std::int64_t best = -1;
                    double bv = 0.0;
                    for (int r = std::max(0, -h0); r < std::min(k, H - h0); ++r)
                        for (int t = std::max(0, -w0); t < std::min(k, W - w0); ++t) {
                            const std::int64_t idx =
                                static_cast<std::int64_t>(h0 + r) * W + (w0 + t);
                            if (best < 0 || ip[idx] > bv) {
                                best = idx;
                                bv = ip[idx];
                            }
                        }
                    op[static_cast<std::int64_t>(oh) * Wo + ow] = bv;
                    (*argmax)[nc * oplane + static_cast<std::int64_t>(oh) * Wo + ow] =
                        nc * iplane + best;
                }
            }
        }
    });
    if (!ng) return out;

    TensorPtr xc = x, oc = out;
    const double inv = 1.0 / (k * k);
    tape.record(out, [xc, oc, kind, argmax, N, C, H, W, Ho, Wo, k, stride, pad, inv]() {
        xc->ensure_grad();
        const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
        const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
        kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
            double* gip = xc->grad.data() + nc * iplane;
            const double* gop = oc->grad.data() + nc * oplane;
            if (kind == PoolKind::Max) {
                for (std::int64_t j = 0; j < oplane; ++j)
                    xc->grad[(*argmax)[nc * oplane + j]] += gop[j];
            } else {
                for (int oh = 0; oh < Ho; ++oh)
                    for (int ow = 0; ow < Wo; ++ow) {
                        const int h0 = oh * stride - pad, w0 = ow * stride - pad;
                        const double g = gop[static_cast<std::int64_t>(oh) * Wo + ow] * inv;
                        for (int r = std::max(0, -h0); r < std::min(k, H - h0); ++r)
                            for (int t = std::max(0, -w0); t < std::min(k, W - w0); ++t)
                                gip[static_cast<std::int64_t>(h0 + r) * W + (w0 + t)] += g;
                    }
            }
        });
    });
    return out;
}

namespace {

enum class Bin { Add, Mul };

TensorPtr binary_op(Tape& tape, const TensorPtr& a, const TensorPtr& b, Bin op) {
    const bool bcast = !(a->shape == b->shape);
    if (bcast) {
        const bool ok = b->shape.n == a->shape.n && b->shape.c == a->shape.c &&
                        b->shape.h == 1 && b->shape.w == 1;
        if (!ok)
            throw DimensionError(std::string(op == Bin::Add ? "add" : "mul") +
                                 ": shapes not broadcastable " + a->shape.str() + " vs " +
                                 b->shape.str());
    }
    const bool ng = wants_grad(a) || wants_grad(b);
    auto out = make_out(a->shape, ng);
    const std::int64_t plane = static_cast<std::int64_t>(a->shape.h) * a->shape.w;
    const std::int64_t nc_total = static_cast<std::int64_t>(a->shape.n) * a->shape.c;
    kern::parallel_for(nc_total, [&](std::int64_t nc) {
        const std::int64_t base = nc * plane;
        for (std::int64_t k = 0; k < plane; ++k) {
            const double bv = bcast ? b->data[nc] : b->data[base + k];
            out->data[base + k] =
                op == Bin::Add ? a->data[base + k] + bv : a->data[base + k] * bv;
        }
    });
    if (!ng) return out;

    TensorPtr ac = a, bc = b, oc = out;
    tape.record(out, [ac, bc, oc, op, bcast, plane, nc_total]() {
        if (ac->requires_grad) {
            ac->ensure_grad();
            kern::parallel_for(nc_total, [&](std::int64_t nc) {
                const std::int64_t base = nc * plane;
                for (std::int64_t k = 0; k < plane; ++k) {
                    const double bv = bcast ? bc->data[nc] : bc->data[base + k];
                    ac->grad[base + k] += op == Bin::Add ? oc->grad[base + k]
                                                         : oc->grad[base + k] * bv;
                }
            });
        }
        if (bc->requires_grad) {
            bc->ensure_grad();
            if (bcast) {
                kern::parallel_for(nc_total, [&](std::int64_t nc) {
                    const std::int64_t base = nc * plane;
                    double s = 0.0;
                    for (std::int64_t k = 0; k < plane; ++k)
                        s += op == Bin::Add ? oc->grad[base + k]
                                            : oc->grad[base + k] * ac->data[base + k];
                    bc->grad[nc] += s;
                });
            } else {
                kern::parallel_for(nc_total, [&](std::int64_t nc) {
                    const std::int64_t base = nc * plane;
                    for (std::int64_t k = 0; k < plane; ++k)
                        bc->grad[base + k] += op == Bin::Add
                                                  ? oc->grad[base + k]
                                                  : oc->grad[base + k] * ac->data[base + k];
                });
            }
        }
    });
    return out;
}

} // namespace

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    return binary_op(tape, a, b, Bin::Add);
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    return binary_op(tape, a, b, Bin::Mul);
}

TensorPtr affine(Tape& tape, const TensorPtr& x, double scale, double shift) {
    const bool ng = wants_grad(x);
    auto out = make_out(x->shape, ng);
    const std::int64_t n = x->numel();
    kern::parallel_for(n, [&](std::int64_t i) { out->data[i] = scale * x->data[i] + shift; });
    if (!ng) return out;
    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc, scale, n]() {
        xc->ensure_grad();
        kern::parallel_for(n, [&](std::int64_t i) { xc->grad[i] += scale * oc->grad[i]; });
    });
    return out;
}

TensorPtr pow_elem(Tape& tape, const TensorPtr& x, int q) {
    if (q < 1)
        throw ConfigError("pow_elem: exponent must be >= 1, got " + std::to_string(q));
    const bool ng = wants_grad(x);
    auto out = make_out(x->shape, ng);
    const std::int64_t n = x->numel();
    kern::parallel_for(n, [&](std::int64_t i) {
        double v = x->data[i];
        double p = v;
        for (int j = 1; j < q; ++j) p *= v;
        out->data[i] = p;
    });
    if (!ng) return out;
    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc, q, n]() {
        xc->ensure_grad();
        kern::parallel_for(n, [&](std::int64_t i) {
            double p = 1.0;
            const double v = xc->data[i];
            for (int j = 1; j < q; ++j) p *= v;
            xc->grad[i] += q * p * oc->grad[i];
        });
    });
    return out;
}

namespace {

struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<double> w0, w1;
};

// align-corners-false sampling for exact 2x upscale
LerpAxis lerp_axis_2x(int in) {
    LerpAxis ax;
    const int out = in * 2;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w0.resize(out);
    ax.w1.resize(out);
    for (int o = 0; o < out; ++o) {
        const double src = (o + 0.5) / 2.0 - 0.5;
        double f = std::floor(src);
        int i0 = static_cast<int>(f);
        double w1 = src - f;
        int i1 = i0 + 1;
        if (i0 < 0) i0 = 0;
        if (i1 > in - 1) i1 = in - 1;
        ax.i0[o] = i0;
        ax.i1[o] = i1;
        ax.w0[o] = 1.0 - w1;
        ax.w1[o] = w1;
    }
    return ax;
}

} // namespace

TensorPtr upsample2x(Tape& tape, const TensorPtr& x, UpMode mode) {
    const int N = x->shape.n, C = x->shape.c, H = x->shape.h, W = x->shape.w;
    const int Ho = 2 * H, Wo = 2 * W;
    const bool ng = wants_grad(x);
    auto out = make_out({N, C, Ho, Wo}, ng);
    const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;

    auto ay = std::make_shared<LerpAxis>();
    auto axx = std::make_shared<LerpAxis>();
    if (mode == UpMode::Bilinear) {
        *ay = lerp_axis_2x(H);
        *axx = lerp_axis_2x(W);
    }
    kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
        const double* ip = x->data.data() + nc * iplane;
        double* op = out->data.data() + nc * oplane;
        if (mode == UpMode::Nearest) {
            for (int oh = 0; oh < Ho; ++oh) {
                const double* irow = ip + static_cast<std::int64_t>(oh / 2) * W;
                double* orow = op + static_cast<std::int64_t>(oh) * Wo;
                for (int ow = 0; ow < Wo; ++ow) orow[ow] = irow[ow / 2];
            }
        } else {
            for (int oh = 0; oh < Ho; ++oh) {
                double* orow = op + static_cast<std::int64_t>(oh) * Wo;
                const double* r0 = ip + static_cast<std::int64_t>(ay->i0[oh]) * W;
                const double* r1 = ip + static_cast<std::int64_t>(ay->i1[oh]) * W;
                for (int ow = 0; ow < Wo; ++ow) {
                    const double top = axx->w0[ow] * r0[axx->i0[ow]] + axx->w1[ow] * r0[axx->i1[ow]];
                    const double bot = axx->w0[ow] * r1[axx->i0[ow]] + axx->w1[ow] * r1[axx->i1[ow]];
                    orow[ow] = ay->w0[oh] * top + ay->w1[oh] * bot;
                }
            }
        }
    });
    if (!ng) return out;

    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc, mode, ay, axx, N, C, H, W, Ho, Wo]() {
        xc->ensure_grad();
        const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
        const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
        kern::parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t nc) {
            double* gip = xc->grad.data() + nc * iplane;
            const double* gop = oc->grad.data() + nc * oplane;
            if (mode == UpMode::Nearest) {
                for (int oh = 0; oh < Ho; ++oh)
                    for (int ow = 0; ow < Wo; ++ow)
                        gip[static_cast<std::int64_t>(oh / 2) * W + ow / 2] +=
                            gop[static_cast<std::int64_t>(oh) * Wo + ow];
            } else {
                for (int oh = 0; oh < Ho; ++oh)
                    for (int ow = 0; ow < Wo; ++ow) {
                        const double g = gop[static_cast<std::int64_t>(oh) * Wo + ow];
                        gip[static_cast<std::int64_t>(ay->i0[oh]) * W + axx->i0[ow]] +=
                            ay->w0[oh] * axx->w0[ow] * g;
                        gip[static_cast<std::int64_t>(ay->i0[oh]) * W + axx->i1[ow]] +=
                            ay->w0[oh] * axx->w1[ow] * g;
                        gip[static_cast<std::int64_t>(ay->i1[oh]) * W + axx->i0[ow]] +=
                            ay->w1[oh] * axx->w0[ow] * g;
                        gip[static_cast<std::int64_t>(ay->i1[oh]) * W + axx->i1[ow]] +=
                            ay->w1[oh] * axx->w1[ow] * g;
                    }
            }
        });
    });
    return out;
}

TensorPtr concat_channels(Tape& tape, const std::vector<TensorPtr>& xs) {
    if (xs.empty())
        throw ContractError("concat_channels: empty input list");
    const int N = xs[0]->shape.n, H = xs[0]->shape.h, W = xs[0]->shape.w;
    int Ctot = 0;
    bool ng = false;
    for (const auto& t : xs) {
        if (t->shape.n != N || t->shape.h != H || t->shape.w != W)
            throw DimensionError("concat_channels: incompatible shapes " + xs[0]->shape.str() +
                                 " vs " + t->shape.str());
        Ctot += t->shape.c;
        ng = ng || wants_grad(t);
    }
    auto out = make_out({N, Ctot, H, W}, ng);
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        int coff = 0;
        for (const auto& t : xs) {
            const std::int64_t nbytes = static_cast<std::int64_t>(t->shape.c) * plane;
            std::copy_n(t->data.data() + static_cast<std::int64_t>(n) * nbytes, nbytes,
                        out->data.data() + (static_cast<std::int64_t>(n) * Ctot + coff) * plane);
            coff += t->shape.c;
        }
    }
    if (!ng) return out;

    std::vector<TensorPtr> xc = xs;
    TensorPtr oc = out;
    tape.record(out, [xc, oc, N, Ctot, plane]() {
        for (int n = 0; n < N; ++n) {
            int coff = 0;
            for (const auto& t : xc) {
                const std::int64_t nbytes = static_cast<std::int64_t>(t->shape.c) * plane;
                if (t->requires_grad) {
                    t->ensure_grad();
                    const double* src =
                        oc->grad.data() + (static_cast<std::int64_t>(n) * Ctot + coff) * plane;
                    double* dst = t->grad.data() + static_cast<std::int64_t>(n) * nbytes;
                    for (std::int64_t k = 0; k < nbytes; ++k) dst[k] += src[k];
                }
                coff += t->shape.c;
            }
        }
    });
    return out;
}

TensorPtr reduce_sum(Tape& tape, const TensorPtr& x) {
    const bool ng = wants_grad(x);
    auto out = make_out({1, 1, 1, 1}, ng);
    double s = 0.0;
    for (double v : x->data) s += v;
    out->data[0] = s;
    if (!ng) return out;
    TensorPtr xc = x, oc = out;
    tape.record(out, [xc, oc]() {
        xc->ensure_grad();
        const double g = oc->grad[0];
        const std::int64_t n = xc->numel();
        kern::parallel_for(n, [&](std::int64_t i) { xc->grad[i] += g; });
    });
    return out;
}

TensorPtr sdiv(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    if (!a->is_scalar() || !b->is_scalar())
        throw ContractError("sdiv: both operands must be scalar, got " + a->shape.str() +
                            " and " + b->shape.str());
    const bool ng = wants_grad(a) || wants_grad(b);
    auto out = make_out({1, 1, 1, 1}, ng);
    out->data[0] = a->data[0] / b->data[0];
    if (!ng) return out;
    TensorPtr ac = a, bc = b, oc = out;
    tape.record(out, [ac, bc, oc]() {
        const double g = oc->grad[0];
        const double av = ac->data[0], bv = bc->data[0];
        if (ac->requires_grad) {
            ac->ensure_grad();
            ac->grad[0] += g / bv;
        }
        if (bc->requires_grad) {
            bc->ensure_grad();
            bc->grad[0] += -g * av / (bv * bv);
        }
    });
    return out;
}

} // namespace onnseg
