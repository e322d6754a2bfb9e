#pragma once

#include <functional>
#include <vector>

#include "onnseg/tensor.hpp"

namespace onnseg {

/// Records one backward closure per forward op; backward() replays them in
/// exact reverse order. Gradients accumulate additively into leaf tensors
/// (parameters, inputs); grads of tensors produced on the tape are scratch
/// that each backward pass re-zeroes, so calling backward twice doubles leaf
/// gradients without corrupting intermediates.
class Tape {
public:
    void record(TensorPtr out, std::function<void()> fn);
    void backward(const TensorPtr& loss);
    void clear();
    std::size_t size() const { return recs_.size(); }

private:
    struct Rec {
        TensorPtr out;
        std::function<void()> fn;
    };
    std::vector<Rec> recs_;
};

enum class Act { Relu, Sigmoid, Tanh };
enum class PoolKind { Avg, Max };
enum class UpMode { Nearest, Bilinear };

/// Learnable scale/shift plus running statistics for one channel axis.
/// Normalization uses biased batch variance; running_var is updated with the
/// unbiased estimate (momentum 0.1, eps 1e-5 by convention).
struct BatchNormState {
    TensorPtr gamma, beta;               // (1,C,1,1), learnable
    TensorPtr running_mean, running_var; // (1,C,1,1), buffers
    double eps = 1e-5;
    double momentum = 0.1;

    static BatchNormState make(int channels);
    int channels() const { return gamma->shape.c; }
};

// weight shape (O,I,kH,kW) mapped onto Shape4{n=O,c=I,h=kH,w=kW};
// bias is (1,O,1,1) or null.
TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int pad);

TensorPtr batchnorm2d(Tape& tape, const TensorPtr& x, BatchNormState& bn, bool training);

TensorPtr activation(Tape& tape, const TensorPtr& x, Act kind);

// (N,C,H,W) -> (N,C,1,1); max routes gradient to the first argmax in
// row-major order.
TensorPtr pool_global(Tape& tape, const TensorPtr& x, PoolKind kind);

// Windowed pooling. Max ignores padding; avg divides by k*k including padding.
TensorPtr pool2d(Tape& tape, const TensorPtr& x, PoolKind kind, int k, int stride, int pad);

// Shapes must match, or b may be (N,C,1,1) broadcasting over H,W.
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// out = scale*x + shift, elementwise.
TensorPtr affine(Tape& tape, const TensorPtr& x, double scale, double shift);

// out = x^q, integer q >= 1.
TensorPtr pow_elem(Tape& tape, const TensorPtr& x, int q);

// (N,C,H,W) -> (N,C,2H,2W). Bilinear uses the align-corners-false
// convention: source coordinate of output o is (o + 0.5)/2 - 0.5, edges
// clamped. Nearest replicates each pixel into a 2x2 block.
TensorPtr upsample2x(Tape& tape, const TensorPtr& x, UpMode mode);

TensorPtr concat_channels(Tape& tape, const std::vector<TensorPtr>& xs);

// Sum of all elements -> (1,1,1,1).
TensorPtr reduce_sum(Tape& tape, const TensorPtr& x);

// Scalar division a/b; both operands must be (1,1,1,1).
TensorPtr sdiv(Tape& tape, const TensorPtr& a, const TensorPtr& b);

} // namespace onnseg
