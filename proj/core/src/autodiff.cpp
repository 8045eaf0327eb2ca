#include "vlmlens/autodiff.hpp"

#include <cmath>

namespace vlmlens {

namespace {

void check_same_tape(const Var& a, const Var& b) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::contract,
          "ops require vars from the same live tape");
}

}  // namespace

const DenseArray& Var::value() const {
  require(tape != nullptr && id >= 0, ErrorKind::contract, "value() on null var");
  return tape->value_of(id);
}

const DenseArray& Gradients::at(const Var& v) const {
  auto it = by_id_.find(v.id);
  require(it != by_id_.end(), ErrorKind::lookup,
          "no gradient recorded for var id " + std::to_string(v.id));
  return it->second;
}

void Tape::check_live() const {
  require(!consumed_, ErrorKind::reuse, "tape already consumed by backward()");
}

const DenseArray& Tape::value_of(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }

Var Tape::emit(Op op, DenseArray value, std::int32_t a, std::int32_t b, std::int32_t c,
               double aux) {
  check_live();
  Node node;
  node.op = op;
  node.a = a;
  node.b = b;
  node.c = c;
  node.aux = aux;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::input(DenseArray value) {
  return emit(Op::leaf_input, std::move(value), -1, -1, -1, 0.0);
}

Var Tape::constant(DenseArray value) {
  return emit(Op::leaf_constant, std::move(value), -1, -1, -1, 0.0);
}

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  return t->emit(Tape::Op::matmul, matmul(t->value_of(a.id), t->value_of(b.id)), a.id, b.id,
                 -1, 0.0);
}

Var transpose(const Var& a) {
  Tape* t = a.tape;
  require(t != nullptr, ErrorKind::contract, "transpose on null var");
  return t->emit(Tape::Op::transpose, transpose(t->value_of(a.id)), a.id, -1, -1, 0.0);
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  return t->emit(Tape::Op::add, add(t->value_of(a.id), t->value_of(b.id)), a.id, b.id, -1,
                 0.0);
}

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  return t->emit(Tape::Op::mul, mul(t->value_of(a.id), t->value_of(b.id)), a.id, b.id, -1,
                 0.0);
}

Var scale(const Var& a, double c) {
  Tape* t = a.tape;
  require(t != nullptr, ErrorKind::contract, "scale on null var");
  return t->emit(Tape::Op::scale, scale(t->value_of(a.id), c), a.id, -1, -1, c);
}

Var softmax(const Var& a) {
  Tape* t = a.tape;
  require(t != nullptr, ErrorKind::contract, "softmax on null var");
  return t->emit(Tape::Op::softmax, softmax(t->value_of(a.id)), a.id, -1, -1, 0.0);
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  check_same_tape(x, gain);
  check_same_tape(x, bias);
  Tape* t = x.tape;
  return t->emit(Tape::Op::layer_norm,
                 layer_norm(t->value_of(x.id), t->value_of(gain.id), t->value_of(bias.id), eps),
                 x.id, gain.id, bias.id, eps);
}

Var gelu(const Var& x) {
  Tape* t = x.tape;
  require(t != nullptr, ErrorKind::contract, "gelu on null var");
  return t->emit(Tape::Op::gelu, gelu(t->value_of(x.id)), x.id, -1, -1, 0.0);
}

Var sum(const Var& a) {
  Tape* t = a.tape;
  require(t != nullptr, ErrorKind::contract, "sum on null var");
  return t->emit(Tape::Op::sum, sum(t->value_of(a.id)), a.id, -1, -1, 0.0);
}

Gradients Tape::backward(const Var& loss) {
  check_live();
  require(loss.tape == this, ErrorKind::contract, "backward on var from another tape");
  require(value_of(loss.id).size() == 1, ErrorKind::contract,
          "backward requires a scalar loss");
  consumed_ = true;

  std::vector<DenseArray> grads(nodes_.size());
  auto grad_of = [&](std::int32_t id) -> DenseArray& {
    auto& g = grads[static_cast<std::size_t>(id)];
    if (g.empty() && !nodes_[static_cast<std::size_t>(id)].value.empty())
      g = DenseArray(nodes_[static_cast<std::size_t>(id)].value.shape());
    return g;
  };

  grad_of(loss.id)[0] = 1.0;

  for (std::int32_t idx = static_cast<std::int32_t>(nodes_.size()) - 1; idx >= 0; --idx) {
    const Node& node = nodes_[static_cast<std::size_t>(idx)];
    DenseArray& gout = grads[static_cast<std::size_t>(idx)];
    if (gout.empty()) continue;  // node did not influence the loss

    switch (node.op) {
      case Op::leaf_input:
      case Op::leaf_constant:
        break;
      case Op::matmul: {
        const DenseArray& av = value_of(node.a);
        const DenseArray& bv = value_of(node.b);
        DenseArray da = matmul(gout, transpose(bv));
        DenseArray db = matmul(transpose(av), gout);
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da[i];
        DenseArray& gb = grad_of(node.b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
        break;
      }
      case Op::transpose: {
        DenseArray da = transpose(gout);
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da[i];
        break;
      }
      case Op::add: {
        const DenseArray& av = value_of(node.a);
        const DenseArray& bv = value_of(node.b);
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
        DenseArray& gb = grad_of(node.b);
        if (av.same_shape(bv)) {
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i];
        } else {
          // (N,D) + (D): fold the row axis back into the broadcast operand.
          std::size_t n = av.rows(), d = av.cols();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += gout[i * d + j];
        }
        break;
      }
      case Op::mul: {
        const DenseArray& av = value_of(node.a);
        const DenseArray& bv = value_of(node.b);
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * bv[i];
        DenseArray& gb = grad_of(node.b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * av[i];
        break;
      }
      case Op::scale: {
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += node.aux * gout[i];
        break;
      }
      case Op::softmax: {
        // dx = y * (dy - <dy, y>) per row, with y the stored softmax output.
        const DenseArray& y = node.value;
        std::size_t d = y.shape().back();
        std::size_t rows = y.size() / d;
        DenseArray& ga = grad_of(node.a);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.data() + r * d;
          const double* gr = gout.data() + r * d;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += yr[j] * gr[j];
          double* gar = ga.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) gar[j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::layer_norm: {
        const DenseArray& x = value_of(node.a);
        const DenseArray& gain = value_of(node.b);
        double eps = node.aux;
        std::size_t d = x.shape().back();
        std::size_t rows = x.size() / d;
        DenseArray& gx = grad_of(node.a);
        DenseArray& gg = grad_of(node.b);
        DenseArray& gb = grad_of(node.c);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = x.data() + r * d;
          const double* gr = gout.data() + r * d;
          double mean = 0.0;
          for (std::size_t j = 0; j < d; ++j) mean += xr[j];
          mean /= static_cast<double>(d);
          double var = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double c = xr[j] - mean;
            var += c * c;
          }
          var /= static_cast<double>(d);
          double inv = 1.0 / std::sqrt(var + eps);
          // xhat = (x - mean) * inv; dxhat = dy * gain;
          // dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = gr[j] * gain[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat;
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          double* gxr = gx.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = gr[j] * gain[j];
            gxr[j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
            gg[j] += gr[j] * xhat;
            gb[j] += gr[j];
          }
        }
        break;
      }
      case Op::gelu: {
        const DenseArray& x = value_of(node.a);
        DenseArray& ga = grad_of(node.a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          double v = x[i];
          double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
          double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779;
          ga[i] += gout[i] * (cdf + v * pdf);
        }
        break;
      }
      case Op::sum: {
        DenseArray& ga = grad_of(node.a);
        double g = gout[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        break;
      }
    }
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::leaf_input) {
      if (grads[i].empty()) grads[i] = DenseArray(nodes_[i].value.shape());
      out.by_id_[static_cast<std::int32_t>(i)] = std::move(grads[i]);
    }
  }
  return out;
}

}  // namespace vlmlens
