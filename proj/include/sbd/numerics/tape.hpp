#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "sbd/numerics/tensor.hpp"

namespace sbd {

// Handle to a value recorded on a Tape. Only valid for the tape (and the
// generation of that tape) that produced it.
struct Var {
  std::uint32_t index = 0;
  std::uint64_t tape = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is already
// a topological order, so backward is a single reverse sweep.
template <std::floating_point T>
class Tape {
 public:
  // Adjoint rule: receives the gradient of the node's output and pushes
  // contributions into inputs through Tape::grad_of.
  using Adjoint = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Tape();

  Var constant(Tensor<T> value);
  // The referenced tensor must outlive the tape (or the next clear()).
  Var constant_ref(const Tensor<T>& value);
  // Leaf whose gradient is added into `grad_sink` at the end of backward().
  Var parameter(const Tensor<T>& value, Tensor<T>& grad_sink);

  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Adjoint adjoint);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient accumulator of an input, or nullptr when it needs no gradient.
  Tensor<T>* grad_of(Var v);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once. A tape can be swept
  // only once per recording; clear() starts a new recording.
  void backward(Var loss);

  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }
  // Adjoint rules run by the last backward(); each recorded op at most once.
  std::size_t adjoints_run() const noexcept { return adjoints_run_; }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T>* sink = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    Adjoint adjoint;
  };

  std::size_t check(Var v) const;
  Var push(Node node);

  std::vector<Node> nodes_;
  std::uint64_t id_;
  bool grad_enabled_ = true;
  bool swept_ = false;
  std::size_t adjoints_run_ = 0;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sbd
