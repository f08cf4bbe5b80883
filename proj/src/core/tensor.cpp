#include "vivqa/core/tensor.hpp"

#include <sstream>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/rng.hpp"

namespace vivqa {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::randn(Shape shape, RngStream& rng, double stddev, bool requires_grad) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = stddev * rng.normal();
    return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::uniform(Shape shape, RngStream& rng, double lo, double hi, bool requires_grad) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return from(std::move(shape), std::move(v), requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw IndexError("index rank does not match " + shape_str(shape()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= impl_->shape[axis]) {
            throw IndexError("index " + std::to_string(i) + " out of range on axis " +
                             std::to_string(axis) + " of " + shape_str(shape()));
        }
        flat = flat * impl_->shape[axis] + i;
        ++axis;
    }
    return impl_->data[flat];
}

void Tensor::set_requires_grad(bool flag) {
    if (!impl_->is_leaf) throw UsageError("requires_grad can only be changed on leaf tensors");
    impl_->requires_grad = flag;
    if (!flag) impl_->grad.clear();
}

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

Tensor Tensor::clone(bool requires_grad) const { return from(shape(), impl_->data, requires_grad); }

Tape& Tape::current() {
    thread_local Tape tape;
    return tape;
}

void Tape::record(Node node) { nodes_.push_back(std::move(node)); }

void Tape::clear() {
    nodes_.clear();
    ++generation_;
}

NoGradGuard::NoGradGuard() : previous_(Tape::current().enabled_) { Tape::current().enabled_ = false; }

NoGradGuard::~NoGradGuard() { Tape::current().enabled_ = previous_; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ArgumentError("backward requires a scalar loss, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    Tape& tape = Tape::current();
    const auto& out = loss.impl();
    if (!out->requires_grad) throw UsageError("backward on a loss that does not require a gradient");
    if (out->is_leaf) {
        out->ensure_grad()[0] += 1.0;
        tape.last_visits_ = 0;
        return;
    }
    if (out->generation != tape.generation_ || tape.nodes_.empty()) {
        throw UsageError("backward called on a graph that was already consumed; run a new forward pass");
    }
    out->ensure_grad()[0] += 1.0;

    std::size_t visits = 0;
    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
        const auto& node = *it;
        if (node.output->grad.empty()) continue;  // not reachable from the loss
        node.backward(node.output->grad);
        ++visits;
        // Intermediate gradients are no longer needed once propagated.
        if (!node.output->is_leaf && node.output != out) {
            std::vector<double>().swap(node.output->grad);
        }
    }
    tape.last_visits_ = visits;
    tape.total_visits_ += visits;
    tape.clear();
}

namespace detail {

bool any_requires_grad(const std::vector<ImplPtr>& inputs) {
    for (const auto& in : inputs) {
        if (in->requires_grad) return true;
    }
    return false;
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<ImplPtr> inputs,
                   std::function<void(const std::vector<double>&)> backward_fn) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    Tape& tape = Tape::current();
    if (tape.recording() && any_requires_grad(inputs)) {
        impl->requires_grad = true;
        impl->is_leaf = false;
        impl->generation = tape.generation();
        tape.record(Tape::Node{std::move(inputs), impl, std::move(backward_fn)});
    }
    return Tensor(std::move(impl));
}

}  // namespace detail

}  // namespace vivqa
