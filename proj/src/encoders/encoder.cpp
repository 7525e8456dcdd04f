#include "minpo/encoders/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace minpo::encoders {

std::vector<double> chebyshev_basis(double x, int degree) {
  if (degree < 0) throw std::invalid_argument("chebyshev_basis: negative degree");
  x = std::clamp(x, -1.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(degree) + 1);
  t[0] = 1.0;
  if (degree >= 1) t[1] = x;
  for (int n = 2; n <= degree; ++n) {
    t[static_cast<std::size_t>(n)] = 2.0 * x * t[static_cast<std::size_t>(n - 1)] - t[static_cast<std::size_t>(n - 2)];
  }
  return t;
}

InputScaler::InputScaler(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.empty()) {
    throw std::invalid_argument("InputScaler: bound vectors must be non-empty and equal length");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!(upper_[i] > lower_[i])) throw std::invalid_argument("InputScaler: empty interval");
  }
}

std::vector<double> InputScaler::scale(std::span<const double> x) const {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = 2.0 * (x[i] - lower_[i]) / (upper_[i] - lower_[i]) - 1.0;
  }
  return y;
}

std::vector<double> InputScaler::unscale(std::span<const double> y) const {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    x[i] = lower_[i] + 0.5 * (y[i] + 1.0) * (upper_[i] - lower_[i]);
  }
  return x;
}

std::vector<Var> InputScaler::scale(std::span<const Var> x) const {
  std::vector<Var> y;
  y.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = 2.0 / (upper_[i] - lower_[i]);
    y.push_back(x[i] * a + (-1.0 - a * lower_[i]));
  }
  return y;
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::mlp ? "mlp" : "ckan"; }

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "mlp") return EncoderKind::mlp;
  if (name == "ckan") return EncoderKind::ckan;
  throw std::invalid_argument("unknown encoder kind: " + name);
}

int ckan_parameter_count(std::span<const int> widths, int degree) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] * (degree + 1);
  return n;
}

int mlp_parameter_count(std::span<const int> widths) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

Encoder::Encoder(EncoderKind kind, std::vector<int> widths, int degree, InputScaler scaler)
    : kind_(kind), widths_(std::move(widths)), degree_(degree), scaler_(std::move(scaler)) {
  if (widths_.size() < 2) throw std::invalid_argument("encoder needs input and output widths");
  for (int w : widths_) {
    if (w <= 0) throw std::invalid_argument("encoder widths must be positive");
  }
  if (scaler_.dims() != 0 && scaler_.dims() != widths_.front()) {
    throw std::invalid_argument("input scaler dimension does not match encoder input width");
  }
}

Encoder Encoder::mlp(std::vector<int> widths, InputScaler scaler) {
  if (widths.size() < 3) throw std::invalid_argument("MLP needs at least one hidden layer");
  return Encoder(EncoderKind::mlp, std::move(widths), 0, std::move(scaler));
}

Encoder Encoder::ckan(std::vector<int> widths, int degree, InputScaler scaler) {
  if (degree < 1) throw std::invalid_argument("cKAN degree must be at least 1");
  return Encoder(EncoderKind::ckan, std::move(widths), degree, std::move(scaler));
}

int Encoder::parameter_count() const {
  return kind_ == EncoderKind::ckan ? ckan_parameter_count(widths_, degree_) : mlp_parameter_count(widths_);
}

std::vector<double> Encoder::initial_parameters(std::mt19937_64& rng) const {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(parameter_count()));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int w_in = widths_[l];
    const int w_out = widths_[l + 1];
    if (kind_ == EncoderKind::ckan) {
      const double r = 1.0 / (w_in * (degree_ + 1));
      std::uniform_real_distribution<double> u(-r, r);
      for (int i = 0; i < w_out * w_in * (degree_ + 1); ++i) p.push_back(u(rng));
    } else {
      const double r = std::sqrt(6.0 / (w_in + w_out));
      std::uniform_real_distribution<double> u(-r, r);
      for (int i = 0; i < w_out * w_in; ++i) p.push_back(u(rng));
      for (int i = 0; i < w_out; ++i) p.push_back(0.0);
    }
  }
  return p;
}

Var Encoder::forward(Tape& tape, Var params, std::span<const Var> coords) const {
  (void)tape;
  if (static_cast<int>(coords.size()) != input_dims()) {
    throw std::invalid_argument("encoder forward: coordinate count does not match input width");
  }
  if (params.shape().features != parameter_count()) {
    throw std::invalid_argument("encoder forward: parameter vector has the wrong length");
  }
  std::vector<Var> scaled = scaler_.dims() == 0 ? std::vector<Var>(coords.begin(), coords.end())
                                                 : scaler_.scale(coords);
  Var h = diffkit::concat_features(scaled);
  int offset = 0;
  const std::size_t layers = widths_.size() - 1;
  if (kind_ == EncoderKind::ckan) {
    // Every layer squashes its input with tanh before the Chebyshev basis.
    for (std::size_t l = 0; l < layers; ++l) {
      const int w_in = widths_[l];
      const int w_out = widths_[l + 1];
      const int count = w_out * w_in * (degree_ + 1);
      h = diffkit::chebyshev_tanh_layer(h, diffkit::slice_features(params, offset, count), degree_, w_out);
      offset += count;
    }
  } else {
    for (std::size_t l = 0; l < layers; ++l) {
      const int w_in = widths_[l];
      const int w_out = widths_[l + 1];
      Var w = diffkit::slice_features(params, offset, w_out * w_in);
      Var b = diffkit::slice_features(params, offset + w_out * w_in, w_out);
      offset += w_out * w_in + w_out;
      h = diffkit::affine_features(h, w, b, w_out);
      if (l + 1 < layers) h = diffkit::tanh(h);
    }
  }
  return h;
}

std::vector<double> Encoder::evaluate(std::span<const double> params, std::span<const double> point) const {
  Tape tape;
  auto x = tape.inputs(point, input_dims(), diffkit::JetLayout::plain());
  Var p = tape.constant(diffkit::Shape{parameter_count(), 1}, std::vector<double>(params.begin(), params.end()));
  Var y = forward(tape, p, x);
  auto v = y.value();
  return {v.begin(), v.end()};
}

Var HardConstraint::apply(std::span<const Var> coords, Var raw) const {
  if (!multiplier) return raw;
  return multiplier(coords) * raw;
}

HardConstraint coordinate_product_constraint() {
  return HardConstraint{[](std::span<const Var> x) {
    Var m = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) m = m * x[i];
    return m;
  }};
}

void write_checkpoint(std::ostream& out, std::span<const CheckpointEntry> entries) {
  out << "minpo-checkpoint 1\n";
  char buf[64];
  for (const auto& e : entries) {
    out << "module " << e.module << "\n";
    out << "kind " << to_string(e.kind) << "\n";
    out << "widths";
    for (int w : e.widths) out << ' ' << w;
    out << "\n";
    out << "degree " << e.degree << "\n";
    out << "params " << e.params.size() << "\n";
    for (double v : e.params) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << "\n";
    }
    out << "end\n";
  }
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint truncated; expected " + key);
  if (line.rfind(key, 0) != 0) throw std::runtime_error("checkpoint: expected '" + key + "', got '" + line + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

}  // namespace

std::vector<CheckpointEntry> read_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != "minpo-checkpoint 1") {
    throw std::runtime_error("not a version-1 checkpoint");
  }
  std::vector<CheckpointEntry> entries;
  while (in.peek() != EOF) {
    CheckpointEntry e;
    e.module = expect_key(in, "module");
    e.kind = encoder_kind_from_string(expect_key(in, "kind"));
    std::istringstream widths(expect_key(in, "widths"));
    for (int w; widths >> w;) e.widths.push_back(w);
    e.degree = std::stoi(expect_key(in, "degree"));
    const std::size_t n = std::stoul(expect_key(in, "params"));
    e.params.resize(n);
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error("checkpoint truncated inside parameters");
      e.params[i] = std::stod(line);
    }
    expect_key(in, "end");
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const std::string& path, std::span<const CheckpointEntry> entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, entries);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace minpo::encoders
