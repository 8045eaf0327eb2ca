#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "vlmlens/array.hpp"

namespace vlmlens {

class Tape;

// Lightweight handle to a node on a Tape. Copyable; validity tied to the tape.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  const DenseArray& value() const;
};

// Gradients of one backward pass, keyed by node id. Query with the Var handles
// returned by Tape::input.
class Gradients {
 public:
  const DenseArray& at(const Var& v) const;

 private:
  friend class Tape;
  std::unordered_map<std::int32_t, DenseArray> by_id_;
};

// Reverse-mode gradient tape. Records every op applied to its Vars, then
// backward() replays the graph in reverse. A tape is single-use: backward
// consumes it, and any further recording or a second backward throws
// ErrorKind::reuse. Forward values are produced by the same kernels as the
// eager DenseArray path, so a taped forward pass is bit-identical to a plain one.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient is reported by backward().
  Var input(DenseArray value);
  // Leaf treated as fixed data; no gradient is accumulated for it.
  Var constant(DenseArray value);

  // loss must be a single-element array. Consumes the tape.
  Gradients backward(const Var& loss);

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend struct Var;
  friend Var matmul(const Var&, const Var&);
  friend Var transpose(const Var&);
  friend Var add(const Var&, const Var&);
  friend Var mul(const Var&, const Var&);
  friend Var scale(const Var&, double);
  friend Var softmax(const Var&);
  friend Var layer_norm(const Var&, const Var&, const Var&, double);
  friend Var gelu(const Var&);
  friend Var sum(const Var&);

  enum class Op : std::uint8_t {
    leaf_input,
    leaf_constant,
    matmul,
    transpose,
    add,
    mul,
    scale,
    softmax,
    layer_norm,
    gelu,
    sum
  };

  struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t c = -1;
    double aux = 0.0;  // scale factor / layer_norm epsilon
    DenseArray value;
  };

  Var emit(Op op, DenseArray value, std::int32_t a, std::int32_t b, std::int32_t c,
           double aux);
  void check_live() const;
  const DenseArray& value_of(std::int32_t id) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Op overloads mirroring the eager kernels in array.hpp. Mixing Vars from
// different tapes throws ErrorKind::contract.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var softmax(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var gelu(const Var& x);
Var sum(const Var& a);

}  // namespace vlmlens
