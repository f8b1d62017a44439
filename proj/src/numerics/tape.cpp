#include "sbd/numerics/tape.hpp"

#include <atomic>
#include <string>

#include "sbd/errors.hpp"

namespace sbd {

namespace {
// Every tape recording gets a fresh id, so handles from a cleared or foreign
// tape are caught instead of silently aliasing a different node.
std::atomic<std::uint64_t> next_tape_id{1};
}  // namespace

template <std::floating_point T>
Tape<T>::Tape() : id_(next_tape_id.fetch_add(1)) {}

template <std::floating_point T>
std::size_t Tape<T>::check(Var v) const {
  if (v.tape != id_) throw GraphError("variable belongs to another tape or a cleared recording");
  if (v.index >= nodes_.size()) throw GraphError("variable index out of range");
  return v.index;
}

template <std::floating_point T>
Var Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

template <std::floating_point T>
Var Tape<T>::constant(Tensor<T> value) {
  value.check_finite("constant");
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

template <std::floating_point T>
Var Tape<T>::constant_ref(const Tensor<T>& value) {
  Node n;
  n.ref = &value;
  return push(std::move(n));
}

template <std::floating_point T>
Var Tape<T>::parameter(const Tensor<T>& value, Tensor<T>& grad_sink) {
  if (grad_sink.size() != value.size()) throw GraphError("parameter gradient sink has the wrong size");
  Node n;
  n.ref = &value;
  n.sink = &grad_sink;
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <std::floating_point T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, Adjoint adjoint) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[check(in)].requires_grad;
  value.check_finite("recorded op");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = grad_enabled_ && needs;
  if (n.requires_grad) n.adjoint = std::move(adjoint);
  return push(std::move(n));
}

template <std::floating_point T>
const Tensor<T>& Tape<T>::value(Var v) const {
  const Node& n = nodes_[check(v)];
  return n.ref ? *n.ref : n.owned;
}

template <std::floating_point T>
bool Tape<T>::requires_grad(Var v) const {
  return nodes_[check(v)].requires_grad;
}

template <std::floating_point T>
Tensor<T>* Tape<T>::grad_of(Var v) {
  Node& n = nodes_[check(v)];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor<T>::zeros_like(n.ref ? *n.ref : n.owned);
    n.has_grad = true;
  }
  return &n.grad;
}

template <std::floating_point T>
void Tape<T>::backward(Var loss) {
  const std::size_t root = check(loss);
  if (swept_) throw GraphError("backward() called twice on one recording");
  if (value(loss).size() != 1) throw GraphError("backward() needs a scalar loss");
  swept_ = true;
  adjoints_run_ = 0;
  if (!nodes_[root].requires_grad) return;

  grad_of(loss)->fill(T{1});
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    n.grad.check_finite("backward");
    if (n.adjoint) {
      // The adjoint may touch other nodes' storage; keep our gradient alive.
      const Tensor<T> g = std::move(n.grad);
      n.has_grad = false;
      n.adjoint(*this, g);
      ++adjoints_run_;
    } else if (n.sink) {
      *n.sink += n.grad;
    }
  }
}

template <std::floating_point T>
void Tape<T>::clear() {
  nodes_.clear();
  id_ = next_tape_id.fetch_add(1);
  swept_ = false;
  adjoints_run_ = 0;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sbd
