#include "adaptcm/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace adaptcm {

namespace {

constexpr const char* kMagic = "adaptcm-dccm";
constexpr int kVersion = 1;

// Portable uniform double in [0, 1) from the raw 64-bit engine output.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }


std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : in_(std::string(text)) {}

  std::string word(const char* what) {
    std::string tok;
    if (!(in_ >> tok)) throw FormatError(std::string("weight file truncated while reading ") + what);
    return tok;
  }

  void expect(const char* keyword) {
    const std::string tok = word(keyword);
    if (tok != keyword) {
      throw FormatError(std::string("weight file: expected '") + keyword + "', found '" + tok + "'");
    }
  }

  double real(const char* what) {
    const std::string tok = word(what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw FormatError(std::string("weight file: bad number '") + tok + "' for " + what);
    }
    return v;
  }

  long integer(const char* what) {
    const std::string tok = word(what);
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') {
      throw FormatError(std::string("weight file: bad integer '") + tok + "' for " + what);
    }
    return v;
  }

 private:
  std::istringstream in_;
};

}  // namespace

NetworkWeights::NetworkWeights(NetworkDims dims, std::vector<Layer> layers, Box state_box,
                               ParamBox param_box)
    : dims_(dims),
      layers_(std::move(layers)),
      state_box_(std::move(state_box)),
      param_box_(std::move(param_box)) {
  validate();
}

void NetworkWeights::validate() const {
  if (dims_.state_dim < 1 || dims_.input_dim < 1 || dims_.param_dim < 0) {
    throw ShapeMismatch("network: invalid dimensions");
  }
  if (state_box_.dim() != dims_.state_dim || param_box_.dim() != dims_.param_dim) {
    throw ShapeMismatch("network: scaling boxes do not match (n, l)");
  }
  if (layers_.empty()) throw ShapeMismatch("network: no layers");
  Eigen::Index width = dims_.input_width();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.weight.cols() != width || l.bias.size() != l.weight.rows()) {
      throw ShapeMismatch("network: layer " + std::to_string(i) + " has inconsistent widths");
    }
    width = l.weight.rows();
  }
  if (width != dims_.output_width()) {
    throw ShapeMismatch("network: output width " + std::to_string(width) + ", expected " +
                        std::to_string(dims_.output_width()));
  }
  if (layers_.back().activation != Activation::Identity) {
    throw ShapeMismatch("network: output layer must be linear");
  }
}

NetworkWeights NetworkWeights::initialize(NetworkDims dims, const std::vector<int>& hidden,
                                          Box state_box, ParamBox param_box, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  int fan_in = dims.input_width();
  for (std::size_t i = 0; i <= hidden.size(); ++i) {
    const bool last = i == hidden.size();
    const int out = last ? dims.output_width() : hidden[i];
    if (out < 1) throw ShapeMismatch("network: hidden widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer layer;
    layer.weight.resize(out, fan_in);
    layer.bias.resize(out);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = bound * (2.0 * unit_uniform(rng) - 1.0);
    for (int r = 0; r < out; ++r) layer.bias[r] = bound * (2.0 * unit_uniform(rng) - 1.0);
    layer.activation = last ? Activation::Identity : Activation::Tanh;
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return NetworkWeights(dims, std::move(layers), std::move(state_box), std::move(param_box));
}

std::size_t NetworkWeights::num_parameters() const {
  std::size_t count = 0;
  for (const Layer& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

Vec NetworkWeights::flatten() const {
  Vec p(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index k = 0;
  for (const Layer& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) p[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) p[k++] = l.bias[r];
  }
  return p;
}

void NetworkWeights::assign(std::span<const double> p) {
  if (p.size() != num_parameters()) throw ShapeMismatch("network: parameter count mismatch");
  std::size_t k = 0;
  for (Layer& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = p[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = p[k++];
  }
}

Vec NetworkWeights::scale_inputs(const Vec& x, const Vec& r) const {
  if (x.size() != dims_.state_dim || r.size() != dims_.param_dim) {
    throw DimensionError("network: input dimension mismatch");
  }
  Vec z(dims_.input_width());
  for (int i = 0; i < dims_.state_dim; ++i) {
    const double span = state_box_.upper[i] - state_box_.lower[i];
    z[i] = span > 0.0 ? 2.0 * (x[i] - state_box_.lower[i]) / span - 1.0 : 0.0;
  }
  for (int i = 0; i < dims_.param_dim; ++i) {
    const double span = param_box_.upper[i] - param_box_.lower[i];
    z[dims_.state_dim + i] = span > 0.0 ? 2.0 * (r[i] - param_box_.lower[i]) / span - 1.0 : 0.0;
  }
  return z;
}

Vec NetworkWeights::forward(const Vec& scaled) const {
  if (scaled.size() != dims_.input_width()) throw DimensionError("network: input width mismatch");
  Vec h = scaled;
  for (const Layer& l : layers_) {
    Vec next = l.bias;
    next.noalias() += l.weight * h;
    if (l.activation == Activation::Tanh) next = next.array().tanh();
    h = std::move(next);
  }
  return h;
}

Mat unpack_metric(const Vec& o, int n) {
  Mat m(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = o[k];
      m(j, i) = o[k];
      ++k;
    }
  }
  return m;
}

Mat unpack_gain(const Vec& o, int n, int m) {
  Mat k(m, n);
  const int offset = n * (n + 1) / 2;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = o[offset + i * n + j];
  return k;
}

MetricGainPair evaluate(const NetworkWeights& w, const Vec& x, const Vec& r) {
  const Vec o = w.outputs(x, r);
  const auto& d = w.dims();
  return {unpack_metric(o, d.state_dim), unpack_gain(o, d.state_dim, d.input_dim)};
}

SiameseOutput evaluate_siamese(const NetworkWeights& w, const Vec& x_k, const Vec& x_next,
                               const Vec& r) {
  SiameseOutput s;
  s.current = evaluate(w, x_k, r);
  s.next_metric = evaluate(w, x_next, r).M;
  return s;
}

// ---- expressions ----

std::vector<ad::Var> scale_inputs_expr(const NetworkWeights& w, std::span<const ad::Var> x,
                                       std::span<const ad::Var> r) {
  const auto& d = w.dims();
  if (static_cast<int>(x.size()) != d.state_dim || static_cast<int>(r.size()) != d.param_dim) {
    throw DimensionError("network: input dimension mismatch");
  }
  std::vector<ad::Var> z;
  z.reserve(static_cast<std::size_t>(d.input_width()));
  auto scaled = [](ad::Var v, double lo, double hi) {
    ad::Graph& g = *v.graph();
    const double span = hi - lo;
    if (!(span > 0.0)) return ad::constant(g, 0.0);
    return (2.0 / span) * v + (-2.0 * lo / span - 1.0);
  };
  for (int i = 0; i < d.state_dim; ++i)
    z.push_back(scaled(x[i], w.state_box().lower[i], w.state_box().upper[i]));
  for (int i = 0; i < d.param_dim; ++i)
    z.push_back(scaled(r[i], w.param_box().lower[i], w.param_box().upper[i]));
  return z;
}

std::vector<ad::Var> network_expr(const NetworkWeights& shape, std::span<const ad::Var> params,
                                  std::span<const ad::Var> scaled_inputs, int output_count) {
  if (params.size() != shape.num_parameters()) {
    throw ShapeMismatch("network_expr: parameter count mismatch");
  }
  if (static_cast<int>(scaled_inputs.size()) != shape.dims().input_width()) {
    throw DimensionError("network_expr: input width mismatch");
  }
  std::vector<ad::Var> h(scaled_inputs.begin(), scaled_inputs.end());
  std::size_t k = 0;
  const auto& layers = shape.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    const auto rows = static_cast<std::size_t>(l.weight.rows());
    const auto cols = static_cast<std::size_t>(l.weight.cols());
    const bool last = li + 1 == layers.size();
    const std::size_t built =
        last && output_count >= 0 ? std::min(rows, static_cast<std::size_t>(output_count)) : rows;
    const std::size_t bias_offset = k + rows * cols;
    std::vector<ad::Var> next;
    next.reserve(built);
    for (std::size_t r = 0; r < built; ++r) {
      ad::Var acc = params[bias_offset + r];
      for (std::size_t c = 0; c < cols; ++c) acc = acc + params[k + r * cols + c] * h[c];
      next.push_back(l.activation == Activation::Tanh ? ad::tanh(acc) : acc);
    }
    k = bias_offset + rows;
    h = std::move(next);
  }
  return h;
}

std::vector<ad::Var> constant_params(ad::Graph& g, const NetworkWeights& w) {
  const Vec p = w.flatten();
  std::vector<ad::Var> out;
  out.reserve(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(ad::constant(g, p[i]));
  return out;
}

ad::ExprMatrix unpack_metric_expr(std::span<const ad::Var> o, int n) {
  if (static_cast<int>(o.size()) < n * (n + 1) / 2) throw DimensionError("too few metric outputs");
  ad::ExprMatrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n), o[0]);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = o[k];
      m(j, i) = o[k];
      ++k;
    }
  }
  return m;
}

ad::ExprMatrix unpack_gain_expr(std::span<const ad::Var> o, int n, int m) {
  const int offset = n * (n + 1) / 2;
  if (static_cast<int>(o.size()) < offset + n * m) throw DimensionError("too few gain outputs");
  ad::ExprMatrix k(static_cast<std::size_t>(m), static_cast<std::size_t>(n), o[0]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = o[static_cast<std::size_t>(offset + i * n + j)];
  return k;
}

// ---- persistence ----

std::string serialize(const NetworkWeights& w) {
  std::ostringstream os;
  const auto& d = w.dims();
  os << kMagic << ' ' << kVersion << '\n';
  os << "dims " << d.state_dim << ' ' << d.input_dim << ' ' << d.param_dim << '\n';
  auto write_box = [&](const char* tag, const Box& b) {
    os << tag;
    for (Eigen::Index i = 0; i < b.dim(); ++i) os << ' ' << hex(b.lower[i]);
    for (Eigen::Index i = 0; i < b.dim(); ++i) os << ' ' << hex(b.upper[i]);
    os << '\n';
  };
  write_box("state_box", w.state_box());
  write_box("param_box", w.param_box());
  os << "layers " << w.layers().size() << '\n';
  for (const Layer& l : w.layers()) {
    os << "layer " << l.weight.rows() << ' ' << l.weight.cols() << ' '
       << activation_name(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) os << (c ? " " : "") << hex(l.weight(r, c));
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) os << (r ? " " : "") << hex(l.bias[r]);
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

NetworkWeights deserialize(std::string_view text, std::optional<NetworkDims> expected) {
  TokenReader in(text);
  if (in.word("header") != kMagic) throw FormatError("not an adaptcm weight file");
  const long version = in.integer("version");
  if (version != kVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  in.expect("dims");
  NetworkDims d;
  d.state_dim = static_cast<int>(in.integer("n"));
  d.input_dim = static_cast<int>(in.integer("m"));
  d.param_dim = static_cast<int>(in.integer("l"));
  if (d.state_dim < 1 || d.input_dim < 1 || d.param_dim < 0 || d.state_dim > 64 ||
      d.input_dim > 64 || d.param_dim > 64) {
    throw FormatError("weight file: implausible dimensions");
  }
  if (expected && !(*expected == d)) {
    throw ShapeMismatch("weight file has (n, m, l) = (" + std::to_string(d.state_dim) + ", " +
                        std::to_string(d.input_dim) + ", " + std::to_string(d.param_dim) +
                        "), expected (" + std::to_string(expected->state_dim) + ", " +
                        std::to_string(expected->input_dim) + ", " +
                        std::to_string(expected->param_dim) + ")");
  }
  auto read_box = [&](const char* tag, int dim) {
    in.expect(tag);
    Vec lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) lo[i] = in.real(tag);
    for (int i = 0; i < dim; ++i) hi[i] = in.real(tag);
    return Box(lo, hi);
  };
  Box sbox = read_box("state_box", d.state_dim);
  Box pbox = read_box("param_box", d.param_dim);
  in.expect("layers");
  const long count = in.integer("layer count");
  if (count < 1 || count > 64) throw FormatError("weight file: implausible layer count");
  std::vector<Layer> layers;
  for (long li = 0; li < count; ++li) {
    in.expect("layer");
    const long rows = in.integer("rows");
    const long cols = in.integer("cols");
    if (rows < 1 || cols < 1 || rows > 4096 || cols > 4096) {
      throw FormatError("weight file: implausible layer shape");
    }
    const std::string act = in.word("activation");
    Layer l;
    if (act == "tanh") l.activation = Activation::Tanh;
    else if (act == "identity") l.activation = Activation::Identity;
    else throw FormatError("weight file: unknown activation '" + act + "'");
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) l.weight(r, c) = in.real("weight");
    for (long r = 0; r < rows; ++r) l.bias[r] = in.real("bias");
    layers.push_back(std::move(l));
  }
  in.expect("end");
  return NetworkWeights(d, std::move(layers), std::move(sbox), std::move(pbox));
}

void save_weights(const NetworkWeights& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << serialize(w);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

NetworkWeights load_weights(const std::string& path, std::optional<NetworkDims> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str(), expected);
}

}  // namespace adaptcm
