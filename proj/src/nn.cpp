#include "intman/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "intman/errors.hpp"

namespace intman {

std::string activation_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  throw InputError("unknown activation '" + s + "'");
}

Mlp::Mlp(const std::vector<int>& sizes, const std::vector<Activation>& acts) {
  if (sizes.size() < 2 || acts.size() != sizes.size() - 1)
    throw InputError("mlp: need one activation per layer");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] <= 0 || sizes[i + 1] <= 0) throw InputError("mlp: layer sizes must be positive");
    layers_.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]),
                       Eigen::VectorXd::Zero(sizes[i + 1]), acts[i]});
  }
}

Mlp Mlp::policy_net(int features) {
  return Mlp({features, 4, 2, 1}, {Activation::Relu, Activation::Linear, Activation::Linear});
}

Mlp Mlp::critic_net(int input_dim, int hidden) {
  return Mlp({input_dim, hidden, hidden, 1},
             {Activation::Relu, Activation::Relu, Activation::Linear});
}

void Mlp::init(std::mt19937_64& rng) {
  for (Layer& l : layers_) {
    const double a = 1.0 / std::sqrt(static_cast<double>(l.W.cols()));
    std::uniform_real_distribution<double> U(-a, a);
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = U(rng);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = U(rng);
  }
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows()); }

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& in, Cache* cache) const {
  if (in.rows() != input_dim()) throw InputError("mlp: input dimension mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd h = in;
  for (const Layer& l : layers_) {
    Eigen::MatrixXd z = l.W * h;
    z.colwise() += l.b;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    h = l.act == Activation::Relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

double Mlp::forward_scalar(const Eigen::VectorXd& in) const { return forward(in)(0, 0); }

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                              Eigen::VectorXd* grad) const {
  std::vector<std::size_t> offset(layers_.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offset[i] = off;
    off += static_cast<std::size_t>(layers_[i].W.size() + layers_[i].b.size());
  }
  if (grad && static_cast<std::size_t>(grad->size()) != off)
    throw InputError("mlp: gradient buffer has the wrong size");

  Eigen::MatrixXd d = d_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    if (l.act == Activation::Relu)
      d = d.cwiseProduct((cache.pre[li].array() > 0.0).cast<double>().matrix());
    if (grad) {
      const Eigen::MatrixXd gW = d * cache.inputs[li].transpose();
      std::size_t p = offset[li];
      for (Eigen::Index r = 0; r < gW.rows(); ++r)
        for (Eigen::Index c = 0; c < gW.cols(); ++c) (*grad)(static_cast<Eigen::Index>(p++)) += gW(r, c);
      const Eigen::VectorXd gb = d.rowwise().sum();
      for (Eigen::Index r = 0; r < gb.size(); ++r) (*grad)(static_cast<Eigen::Index>(p++)) += gb(r);
    }
    d = l.W.transpose() * d;
  }
  return d;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

Eigen::VectorXd Mlp::params() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(num_params()));
  Eigen::Index i = 0;
  for (const Layer& l : layers_) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) p(i++) = l.W(r, c);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) p(i++) = l.b(r);
  }
  return p;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != num_params())
    throw InputError("mlp: parameter vector has the wrong size");
  Eigen::Index i = 0;
  for (Layer& l : layers_) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = p(i++);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = p(i++);
  }
}

namespace {

void write_row(std::ostream& os, const double* v, Eigen::Index n) {
  char buf[32];
  for (Eigen::Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    os << (i ? " " : "") << buf;
  }
  os << '\n';
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw InputError("mlp: truncated parameter data");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw InputError("mlp: bad number '" + tok + "'");
  return v;
}

}  // namespace

void Mlp::save(std::ostream& os) const {
  os << "intman-mlp " << kNetFormatVersion << '\n' << "layers " << layers_.size() << '\n';
  for (const Layer& l : layers_)
    os << l.W.cols() << ' ' << l.W.rows() << ' ' << activation_name(l.act) << '\n';
  for (const Layer& l : layers_) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      const Eigen::VectorXd row = l.W.row(r).transpose();
      write_row(os, row.data(), row.size());
    }
    write_row(os, l.b.data(), l.b.size());
  }
}

Mlp Mlp::load(std::istream& is) {
  std::string magic, word;
  int version = 0;
  std::size_t n = 0;
  if (!(is >> magic >> version) || magic != "intman-mlp")
    throw InputError("mlp: not a network file");
  if (version != kNetFormatVersion) throw InputError("mlp: unsupported format version");
  if (!(is >> word >> n) || word != "layers" || n == 0) throw InputError("mlp: bad layer count");
  std::vector<int> sizes;
  std::vector<Activation> acts;
  for (std::size_t i = 0; i < n; ++i) {
    int in = 0, out = 0;
    std::string act;
    if (!(is >> in >> out >> act)) throw InputError("mlp: bad layer header");
    if (i == 0) sizes.push_back(in);
    if (in != sizes.back()) throw InputError("mlp: inconsistent layer shapes");
    sizes.push_back(out);
    acts.push_back(parse_activation(act));
  }
  Mlp net(sizes, acts);
  for (Layer& l : net.layers_) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = read_double(is);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = read_double(is);
  }
  return net;
}

void Mlp::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  save(os);
}

Mlp Mlp::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  return load(is);
}

}  // namespace intman
