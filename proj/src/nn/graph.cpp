#include "hldet/nn/graph.hpp"

#include <stdexcept>

namespace hldet::nn {

Parameter& ParameterSet::add(std::string name, Matrix init) {
  if (find(name)) throw std::logic_error("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::at(std::string_view name) {
  auto* p = find(name);
  if (!p) throw std::out_of_range("no parameter " + std::string(name));
  return *p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterSet::with_prefix(std::string_view prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (std::string_view(p->name).starts_with(prefix)) out.push_back(p.get());
  return out;
}

void ParameterSet::set_trainable(bool on) {
  for (auto& p : params_) p->trainable = on;
}

void ParameterSet::set_trainable(std::string_view prefix, bool on) {
  for (auto* p : with_prefix(prefix)) p->trainable = on;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_)
    if (p->trainable) p->zero_grad();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

const Matrix& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.needs_grad = grad_enabled_ && p.trainable;
  if (n.needs_grad) {
    int id = static_cast<int>(nodes_.size());
    Parameter* pp = &p;
    n.backward = [pp, id](Graph& g) {
      if (pp->grad.size() == 0)
        pp->grad = g.nodes_[id].grad;
      else
        pp->grad += g.nodes_[id].grad;
    };
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Graph::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  Node n;
  n.owned = std::move(value);
  bool any = false;
  for (const auto& v : inputs) any = any || nodes_[v.id()].needs_grad;
  n.needs_grad = grad_enabled_ && any;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Graph::value(int id) const {
  const auto& n = nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

Matrix& Graph::grad(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) {
    const auto& v = value(id);
    n.grad.setZero(v.rows(), v.cols());
  }
  return n.grad;
}

Rng& Graph::rng() {
  if (!rng_) throw std::logic_error("graph has no rng attached");
  return *rng_;
}

void Graph::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw std::logic_error("backward needs a scalar loss");
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id()).setConstant(1.0f);
  for (int i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this);
  }
}

}  // namespace hldet::nn
