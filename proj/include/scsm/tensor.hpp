#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace scsm {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Dense row-major tensor of doubles.
// ---------------------------------------------------------------------------

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    Tensor(std::vector<int> shape, std::vector<double> data);

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // 2D / 3D indexed access, row-major.
    double& at(int i, int j);
    double at(int i, int j) const;
    double& at(int c, int i, int j);
    double at(int c, int i, int j) const;

    std::string shape_str() const;

    static std::string shape_str(const std::vector<int>& shape);
    static std::int64_t shape_size(const std::vector<int>& shape);

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Reverse-mode graph. Every forward op returns a Var holding the value plus
// a closure that scatters the incoming gradient to its parents.
// ---------------------------------------------------------------------------

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;                 // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
    const char* op = "leaf";

    Tensor& ensure_grad();
};

// Leaf constructors. Parameters participate in backward; constants do not.
Var make_param(Tensor value);
Var make_const(Tensor value);

// Runs reverse-mode accumulation from a scalar root. Seeds d(root)/d(root)=1.
void backward(const Var& root);

// Clears gradients of every node reachable from root.
void zero_grad(const Var& root);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);      // element-wise, equal shapes
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var sum(const Var& a);                    // -> scalar shape {1}
Var mean(const Var& a);
Var log_op(const Var& a);
Var exp_op(const Var& a);
Var sigmoid(const Var& a);
Var silu(const Var& a);
Var tanh_op(const Var& a);
Var softmax(const Var& a, int axis);
Var reshape(const Var& a, std::vector<int> shape);

// Broadcasts a length-n row vector {n} or {1,n} across the rows of a {m,n}.
Var add_rowvec(const Var& a, const Var& v);
// Scales row r of a {m,n} matrix by g[r] where g is {m}. Column-wise variant
// scales column c by g[c].
Var mul_rowwise(const Var& a, const Var& g);
Var mul_colwise(const Var& a, const Var& g);

// conv2d over a {C,H,W} input with a {O,C,kh,kw} kernel and {O} bias.
// Zero padding, cross-correlation (no kernel flip).
Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int padding);

// Align-corners-false bilinear upsampling of a {C,H,W} map by an integer factor.
Var bilinear_upsample(const Var& x, int factor);

// Adaptive average pooling of a {C,H,W} map to {C,out_h,out_w}.
Var adaptive_avg_pool(const Var& x, int out_h, int out_w);

// Channel concatenation of two {Ca,H,W} and {Cb,H,W} maps.
Var concat_channels(const Var& a, const Var& b);

// Spatial window copy out of a {C,H,W} map; gradient scatters back.
Var slice_spatial(const Var& x, int r0, int c0, int h, int w);

// ---------------------------------------------------------------------------
// Multiply-accumulate instrumentation. matmul and conv2d report their MAC
// counts here; callers snapshot the counter around a region of interest.
// ---------------------------------------------------------------------------

std::int64_t mac_count();
void reset_mac_count();

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
//
// Builds f over parameter leaves made from `inputs`, runs backward, and
// compares every component of every gradient against central differences.
// Returns the worst scaled error |a - n| / max(1, |a|, |n|).
// ---------------------------------------------------------------------------

using GradFn = std::function<Var(const std::vector<Var>&)>;

double grad_check(const GradFn& f, std::vector<Tensor> inputs, double eps = 1e-5);

// Checks at most `per_leaf` randomly chosen components of each input; keeps
// large-parameter checks tractable.
double grad_check_sampled(const GradFn& f, std::vector<Tensor> inputs, double eps,
                          int per_leaf, std::uint64_t seed);

}  // namespace scsm
