#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "ntm/rng.hpp"
#include "ntm/tensor.hpp"

namespace ntm {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape
// lives and has not been reset.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  bool defined() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of primitive operations. Replaying the recorded adjoints
// in reverse creation order visits every node once and accumulates
// gradients into the leaves.
class Tape {
 public:
  using BackFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Inserts a leaf holding a copy of `value`. Trainable leaves are
  // guaranteed a (possibly zero) gradient after backward().
  Var leaf(Tensor value, bool trainable = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Reverse pass from a scalar loss. Calling twice without reset() is an
  // error, as is a non-scalar loss.
  void backward(Var loss);

  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool backward_run() const { return backward_run_; }

  // Low-level surface for operation implementations.
  Var emit(Tensor value, BackFn back);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  Tensor& grad_buf(std::size_t id);
  bool grad_touched(std::size_t id) const { return !nodes_[id].grad.empty(); }
  const Tensor& grad_of(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until first touched in the reverse pass
    BackFn back;  // null for leaves
    bool trainable = false;
  };

  // Deque, not vector: references handed out by value_of()/grad_buf() must
  // survive later emits.
  std::deque<Node> nodes_;
  bool backward_run_ = false;
};

// ---- primitive operations ----
// Matrix views: rank-1 tensors act as 1×n rows. Outputs of matrix products
// are rank-2. All ops check shapes and record adjoints on the tape.

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_rowvec(Var a, Var bias);  // bias broadcast over rows of a

Var scale(Var a, double c);
Var add_const(Var a, double c);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var clamp(Var a, double lo, double hi);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

Var sum_rows(Var a);  // m×n -> m×1
Var sum_all(Var a);   // -> scalar
Var mean_all(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

// Inverted dropout: scales kept entries by 1/keep while training; keep=1
// is the identity. The mask consumes one uniform draw per element.
Var dropout(Var a, double keep, Rng& rng);

// Pairwise-angle statistics of the rows of a K×H matrix: output is
// {mean angle, variance of angles} over all K² ordered pairs, diagonal
// included at angle zero. Angles use arccos of the absolute cosine
// similarity. Zero-norm rows are rejected.
Var angle_stats(Var t);

}  // namespace ntm
