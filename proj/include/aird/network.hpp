#pragma once

#include <string>
#include <vector>

#include "aird/mat.hpp"
#include "aird/rng.hpp"

namespace aird {

enum class ActKind { Tanh, Softplus, Identity, Relu };

// Scalar activation with certified bound gamma >= 1 on |phi(0)|, |phi'| and
// |phi''| (sampled on a [-10,10] grid at construction). ReLU has no second
// derivative bound; it is flagged non-smooth and gamma() throws for it.
class Activation {
  public:
    static Activation make(ActKind kind);
    static Activation parse(const std::string& name);

    double phi(double x) const;
    double dphi(double x) const;
    double d2phi(double x) const;

    ActKind kind() const { return kind_; }
    bool smooth() const { return kind_ != ActKind::Relu; }
    double gamma() const;
    const char* name() const;

  private:
    explicit Activation(ActKind kind);
    ActKind kind_;
    double gamma_;
};

// f(W, x) = v^T phi(W x) with fixed output vector v: first k/2 entries
// +1/sqrt(k), last k/2 entries -1/sqrt(k). W is the only trainable part.
struct TwoLayerNet {
    Mat W;   // k x d
    Vec v;   // length k
    Activation act;

    std::size_t k() const { return W.rows; }
    std::size_t d() const { return W.cols; }
};

// W_ij i.i.d. standard normal. k must be even and >= 2.
TwoLayerNet init_network(std::size_t k, std::size_t d, Activation act, Rng& rng);

// The fixed +-1/sqrt(k) output vector on its own.
Vec make_output_vector(std::size_t k);

// Outputs on all rows of X: entry i = v^T phi(W x_i).
// Reduction over hidden units uses a fixed chunked order independent of the
// worker count, so parallel and sequential evaluation agree bitwise.
Vec forward(const TwoLayerNet& net, const Mat& X);

// Reusable buffers for the fused forward/gradient pass used by training.
struct EvalCache {
    Mat dphi_t;  // k x n: dphi_t(m, i) = phi'(w_m . x_i)
    Vec f;       // length n
};

void forward_with_cache(const TwoLayerNet& net, const Mat& X, EvalCache& cache);

// Gradient of 1/2 ||f - y||^2 with the residual r = f - y already formed:
// grad(m, :) = v_m * sum_i r_i phi'(w_m . x_i) x_i. Requires a cache filled
// by forward_with_cache against the same (net, X).
Mat gradient_from_residual(const TwoLayerNet& net, const Mat& X, const Vec& residual,
                           const EvalCache& cache);

// Row i is the flattened d f(W, x_i)/d W, row-major over W:
// entry (i, m*d + j) = v_m phi'(w_m . x_i) x_i[j].
Mat jacobian(const TwoLayerNet& net, const Mat& X);

// J J^T without materializing J: (1/k) (phi'(X W^T) phi'(X W^T)^T) o (X X^T).
// Symmetric by construction.
Mat gram(const TwoLayerNet& net, const Mat& X);

// Cross Gram J(W1 on X1) J(W2 on X2)^T via the same Hadamard identity.
// Both nets must share the activation and width.
Mat cross_gram(const Activation& act, const Mat& W1, const Mat& X1,
               const Mat& W2, const Mat& X2);

struct LossGrad {
    double loss;
    Mat grad;  // k x d
};

// loss = 1/2 ||f(W,X) - y||^2, grad = unflatten(J^T r).
LossGrad loss_and_gradient(const TwoLayerNet& net, const Mat& X, const Vec& y);

// Spectral norm (largest singular value) of J(W, X), computed from the Gram.
double jacobian_spectral_norm(const TwoLayerNet& net, const Mat& X);

// Smallest singular value of J(W, X), likewise from the Gram.
double jacobian_sigma_min(const TwoLayerNet& net, const Mat& X);

// Checkpoint I/O: JSON {"k","d","activation","gamma","W"}; v is
// reconstructed on load, never stored.
void save_checkpoint(const TwoLayerNet& net, const std::string& path);
TwoLayerNet load_checkpoint(const std::string& path);

}  // namespace aird
