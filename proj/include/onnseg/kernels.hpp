#pragma once

#include <cstdint>

namespace onnseg::kern {

/// Kernel backend. Both backends compute bit-identical results: every
/// parallel loop writes disjoint outputs and keeps each output's reduction
/// in the same serial order as the reference, so the OpenMP path is safe to
/// use even for reproducibility-sensitive runs. The serial path is retained
/// as the reference implementation for the equivalence tests and the
/// benchmark baseline.
enum class Engine { Serial, OpenMP };

Engine engine();
void set_engine(Engine e);

struct ConvDims {
    int n, cin, h, w;       // input
    int cout, kh, kw;       // kernel
    int stride, pad;
    int hout, wout;         // derived
};

/// Output spatial extent: floor((in + 2*pad - k)/stride) + 1.
int conv_out_extent(int in, int k, int stride, int pad);

// y(n,o,m,p) = bias[o] + sum_{i,r,t} w(o,i,r,t) * xpad(n,i,m*stride+r,p*stride+t)
void conv2d_fwd(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
// gx(n,i,ih,iw) += sum_{o,r,t valid} w(o,i,r,t) * gy(n,o,oh,ow)   (gather form)
void conv2d_bwd_input(const double* gy, const double* w, double* gx, const ConvDims& d);
// gw(o,i,r,t) += sum_{n,oh,ow} gy(n,o,oh,ow) * xpad(n,i,...); gb[o] += sum gy
void conv2d_bwd_weight(const double* gy, const double* x, double* gw, double* gb, const ConvDims& d);

// Per-channel mean and biased variance over N*H*W elements.
void bn_stats(const double* x, int n, int c, int h, int w, double* mean, double* var);

// Serial reference versions, exposed for the equivalence tests and benchmark.
void conv2d_fwd_serial(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void conv2d_bwd_input_serial(const double* gy, const double* w, double* gx, const ConvDims& d);
void conv2d_bwd_weight_serial(const double* gy, const double* x, double* gw, double* gb, const ConvDims& d);
void bn_stats_serial(const double* x, int n, int c, int h, int w, double* mean, double* var);

void conv2d_fwd_omp(const double* x, const double* w, const double* bias, double* y, const ConvDims& d);
void conv2d_bwd_input_omp(const double* gy, const double* w, double* gx, const ConvDims& d);
void conv2d_bwd_weight_omp(const double* gy, const double* x, double* gw, double* gb, const ConvDims& d);
void bn_stats_omp(const double* x, int n, int c, int h, int w, double* mean, double* var);

/// Runs fn(i) for i in [0, count); iterations must touch disjoint data.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn);

} // namespace onnseg::kern

#include "onnseg/kernels_inl.hpp"
