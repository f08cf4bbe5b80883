#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vivqa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t generation = 0;  // tape generation that produced this value

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

using ImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

/// Dense row-major tensor of doubles. Copies share storage (handle
/// semantics); values are treated as immutable once an op has consumed
/// them. Parameters are the exception and are updated in place by the
/// optimizer through mutable_data().
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);
    /// i.i.d. normal(0, stddev) entries drawn from rng.
    static Tensor randn(Shape shape, class RngStream& rng, double stddev = 1.0,
                        bool requires_grad = false);
    static Tensor uniform(Shape shape, class RngStream& rng, double lo, double hi,
                          bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    std::vector<double> to_vector() const { return impl_->data; }
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const { return impl_->requires_grad; }
    /// Only valid on leaves.
    void set_requires_grad(bool flag);
    bool is_leaf() const { return impl_->is_leaf; }
    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient, or an empty span when nothing has accumulated yet.
    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> mutable_grad() { return impl_->ensure_grad(); }
    void zero_grad() { impl_->grad.clear(); }

    /// Fresh leaf with copied values and no gradient history.
    Tensor detach() const;
    Tensor clone(bool requires_grad = false) const;

    const detail::ImplPtr& impl() const { return impl_; }
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    detail::ImplPtr impl_;
};

/// Define-by-run record of differentiable operations for the calling
/// thread. Ops append a node only when gradient recording is enabled and at
/// least one input requires a gradient, so frozen inputs never appear here.
class Tape {
  public:
    struct Node {
        std::vector<detail::ImplPtr> inputs;
        detail::ImplPtr output;
        std::function<void(const std::vector<double>& grad_out)> backward;
    };

    static Tape& current();

    void record(Node node);
    std::size_t size() const noexcept { return nodes_.size(); }
    std::uint64_t generation() const noexcept { return generation_; }
    /// Drops all nodes and starts a new generation.
    void clear();

    std::size_t last_backward_visits() const noexcept { return last_visits_; }
    std::uint64_t total_backward_visits() const noexcept { return total_visits_; }
    void reset_counters() noexcept { last_visits_ = total_visits_ = 0; }

    bool recording() const noexcept { return enabled_; }

  private:
    friend class NoGradGuard;
    friend void backward(const Tensor& loss);

    std::vector<Node> nodes_;
    std::uint64_t generation_ = 1;
    std::size_t last_visits_ = 0;
    std::uint64_t total_visits_ = 0;
    bool enabled_ = true;
};

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

/// Reverse-mode accumulation from a scalar loss into every leaf that
/// requires a gradient. Clears the tape afterwards.
void backward(const Tensor& loss);

namespace detail {

/// Builds an op result. When any input requires a gradient and recording
/// is on, the result joins the tape with the given backward closure.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<ImplPtr> inputs,
                   std::function<void(const std::vector<double>&)> backward_fn);

bool any_requires_grad(const std::vector<ImplPtr>& inputs);

}  // namespace detail

}  // namespace vivqa
