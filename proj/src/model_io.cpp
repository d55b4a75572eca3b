#include <charconv>
#include <cmath>
#include <sstream>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/ingest.hpp"
#include "gpusentinel/numfmt.hpp"

namespace gpusentinel {
namespace {

std::string join(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_exact(values[i]);
  }
  return out;
}

void write_tree(std::string& out, const DecisionTree& tree) {
  out += "tree=" + std::to_string(tree.nodes.size()) + "\n";
  for (const auto& n : tree.nodes) {
    out += std::to_string(n.feature) + "," + format_exact(n.threshold) + "," + std::to_string(n.left) + "," +
           std::to_string(n.right) + "," + format_exact(n.value) + "\n";
  }
}

void write_hyper(std::string& out, const Model& m) {
  const auto kv = [&out](const char* key, const std::string& value) { out += std::string(key) + "=" + value + "\n"; };
  const auto& h = m.hyper;
  switch (m.kind) {
    case ModelKind::logreg:
      kv("learning_rate", format_exact(h.logreg.learning_rate));
      kv("epochs", std::to_string(h.logreg.epochs));
      kv("l2", format_exact(h.logreg.l2));
      break;
    case ModelKind::tree:
      kv("max_depth", std::to_string(h.tree.max_depth));
      kv("min_samples_leaf", std::to_string(h.tree.min_samples_leaf));
      break;
    case ModelKind::forest:
      kv("tree_count", std::to_string(h.forest.tree_count));
      kv("max_depth", std::to_string(h.forest.max_depth));
      kv("min_samples_leaf", std::to_string(h.forest.min_samples_leaf));
      kv("max_features", std::to_string(h.forest.max_features));
      kv("bootstrap", h.forest.bootstrap ? "1" : "0");
      break;
    case ModelKind::gbm:
      kv("rounds", std::to_string(h.gbm.rounds));
      kv("max_depth", std::to_string(h.gbm.max_depth));
      kv("learning_rate", format_exact(h.gbm.learning_rate));
      kv("min_samples_leaf", std::to_string(h.gbm.min_samples_leaf));
      break;
    case ModelKind::mlp:
      kv("hidden1", std::to_string(h.mlp.hidden1));
      kv("hidden2", std::to_string(h.mlp.hidden2));
      kv("learning_rate", format_exact(h.mlp.learning_rate));
      kv("epochs", std::to_string(h.mlp.epochs));
      kv("batch_size", std::to_string(h.mlp.batch_size));
      break;
  }
}

[[noreturn]] void corrupt(const std::string& what) { throw DataError("corrupted model file: " + what); }

class Cursor {
 public:
  explicit Cursor(std::string_view text) : lines_(csv::lines(text)) {}

  bool done() {
    skip_blank();
    return pos_ >= lines_.size();
  }

  std::string_view next() {
    skip_blank();
    if (pos_ >= lines_.size()) corrupt("unexpected end of file");
    return lines_[pos_++];
  }

  std::string_view peek() {
    skip_blank();
    return pos_ < lines_.size() ? lines_[pos_] : std::string_view{};
  }

  void expect(std::string_view line) {
    if (next() != line) corrupt("expected '" + std::string(line) + "'");
  }

  // Reads "key=value" and checks the key.
  std::string_view value(std::string_view key) {
    const auto line = next();
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || line.substr(0, eq) != key) corrupt("expected key '" + std::string(key) + "'");
    return line.substr(eq + 1);
  }

 private:
  void skip_blank() {
    while (pos_ < lines_.size() && trim(lines_[pos_]).empty()) ++pos_;
  }

  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

double to_double(std::string_view text) {
  double v = 0.0;
  if (!parse_double(text, v)) corrupt("bad number '" + std::string(text) + "'");
  return v;
}

std::size_t to_size(std::string_view text) {
  long long v = 0;
  if (!parse_int64(text, v) || v < 0) corrupt("bad count '" + std::string(text) + "'");
  return static_cast<std::size_t>(v);
}

std::vector<double> to_doubles(std::string_view text, std::size_t expected) {
  std::vector<double> out;
  if (!text.empty()) {
    for (const auto& f : csv::split_line(text)) out.push_back(to_double(f));
  }
  if (out.size() != expected) corrupt("expected " + std::to_string(expected) + " values, found " + std::to_string(out.size()));
  return out;
}

DecisionTree read_tree(Cursor& c, std::size_t dim) {
  const std::size_t count = to_size(c.value("tree"));
  if (count == 0) corrupt("empty tree");
  DecisionTree t;
  t.nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto f = csv::split_line(c.next());
    if (f.size() != 5) corrupt("tree node needs 5 fields");
    long long feature = 0, left = 0, right = 0;
    if (!parse_int64(f[0], feature) || !parse_int64(f[2], left) || !parse_int64(f[3], right)) corrupt("bad tree node");
    TreeNode n;
    n.feature = static_cast<int>(feature);
    n.threshold = to_double(f[1]);
    n.left = static_cast<int>(left);
    n.right = static_cast<int>(right);
    n.value = to_double(f[4]);
    t.nodes.push_back(n);
  }
  const auto in_range = [count](long long v) { return v > 0 && static_cast<std::size_t>(v) < count; };
  for (std::size_t i = 0; i < count; ++i) {
    const auto& n = t.nodes[i];
    if (n.feature < 0) continue;
    if (static_cast<std::size_t>(n.feature) >= dim || !std::isfinite(n.threshold)) corrupt("bad split node");
    // Children are stored after their parent, which also rules out cycles.
    if (!in_range(n.left) || !in_range(n.right) || n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i))
      corrupt("bad child index");
  }
  return t;
}

std::vector<DecisionTree> read_trees(Cursor& c, std::size_t dim) {
  const std::size_t count = to_size(c.value("trees"));
  if (count == 0) corrupt("ensemble needs at least one tree");
  std::vector<DecisionTree> trees;
  trees.reserve(count);
  for (std::size_t i = 0; i < count; ++i) trees.push_back(read_tree(c, dim));
  return trees;
}

}  // namespace

std::string serialize_model(const Model& m) {
  std::string out;
  out += kModelHeader;
  out += "\nkind=" + std::string(to_string(m.kind)) + "\n";
  out += "[hyperparams]\n";
  write_hyper(out, m);
  out += "[meta]\n";
  out += "seed=" + std::to_string(m.meta.seed) + "\n";
  out += "dataset_fingerprint=" + m.meta.dataset_fingerprint + "\n";
  out += "window_width=" + (m.meta.window ? std::to_string(m.meta.window->width) : std::string()) + "\n";
  out += "window_stride=" + (m.meta.window ? std::to_string(m.meta.window->stride) : std::string()) + "\n";
  out += "[features]\ncount=" + std::to_string(m.feature_names.size()) + "\n";
  for (const auto& name : m.feature_names) out += name + "\n";
  out += "[scaler]\n";
  if (m.scaler) {
    out += "mean=" + join(m.scaler->mean) + "\n";
    out += "std=" + join(m.scaler->std) + "\n";
  } else {
    out += "none\n";
  }
  out += "[parameters]\n";
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogRegParams>) {
          out += "bias=" + format_exact(p.bias) + "\n";
          out += "weights=" + join(p.weights) + "\n";
        } else if constexpr (std::is_same_v<P, TreeEnsemble>) {
          out += "trees=" + std::to_string(p.trees.size()) + "\n";
          for (const auto& t : p.trees) write_tree(out, t);
        } else if constexpr (std::is_same_v<P, GbmParams>) {
          out += "base_score=" + format_exact(p.base_score) + "\n";
          out += "trees=" + std::to_string(p.trees.size()) + "\n";
          for (const auto& t : p.trees) write_tree(out, t);
        } else {
          out += "layers=" + std::to_string(p.inputs) + "," + std::to_string(p.hidden1) + "," +
                 std::to_string(p.hidden2) + "\n";
          out += "w1=" + join(p.w1) + "\n";
          out += "b1=" + join(p.b1) + "\n";
          out += "w2=" + join(p.w2) + "\n";
          out += "b2=" + join(p.b2) + "\n";
          out += "w3=" + join(p.w3) + "\n";
          out += "b3=" + format_exact(p.b3) + "\n";
        }
      },
      m.params);
  return out;
}

Model deserialize_model(std::string_view text) {
  Cursor c(text);
  if (c.done()) corrupt("empty file");
  const auto head = trim(c.next());
  constexpr std::string_view kMagic = "GPUSENTINEL-MODEL v";
  if (head.substr(0, kMagic.size()) != kMagic) corrupt("missing GPUSENTINEL-MODEL header");
  if (head != kModelHeader) throw DataError("unsupported model version '" + std::string(head.substr(kMagic.size())) + "'");

  Model m;
  m.kind = [&] {
    const auto k = c.value("kind");
    try {
      return parse_model_kind(k);
    } catch (const UsageError&) {
      throw DataError("unknown model kind '" + std::string(k) + "'");
    }
  }();

  c.expect("[hyperparams]");
  auto& h = m.hyper;
  switch (m.kind) {
    case ModelKind::logreg:
      h.logreg.learning_rate = to_double(c.value("learning_rate"));
      h.logreg.epochs = to_size(c.value("epochs"));
      h.logreg.l2 = to_double(c.value("l2"));
      break;
    case ModelKind::tree:
      h.tree.max_depth = to_size(c.value("max_depth"));
      h.tree.min_samples_leaf = to_size(c.value("min_samples_leaf"));
      break;
    case ModelKind::forest:
      h.forest.tree_count = to_size(c.value("tree_count"));
      h.forest.max_depth = to_size(c.value("max_depth"));
      h.forest.min_samples_leaf = to_size(c.value("min_samples_leaf"));
      h.forest.max_features = to_size(c.value("max_features"));
      h.forest.bootstrap = to_size(c.value("bootstrap")) != 0;
      break;
    case ModelKind::gbm:
      h.gbm.rounds = to_size(c.value("rounds"));
      h.gbm.max_depth = to_size(c.value("max_depth"));
      h.gbm.learning_rate = to_double(c.value("learning_rate"));
      h.gbm.min_samples_leaf = to_size(c.value("min_samples_leaf"));
      break;
    case ModelKind::mlp:
      h.mlp.hidden1 = to_size(c.value("hidden1"));
      h.mlp.hidden2 = to_size(c.value("hidden2"));
      h.mlp.learning_rate = to_double(c.value("learning_rate"));
      h.mlp.epochs = to_size(c.value("epochs"));
      h.mlp.batch_size = to_size(c.value("batch_size"));
      break;
  }

  c.expect("[meta]");
  {
    const auto s = c.value("seed");
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), m.meta.seed);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) corrupt("bad seed");
  }
  m.meta.dataset_fingerprint = std::string(c.value("dataset_fingerprint"));
  const auto ww = c.value("window_width");
  const auto ws = c.value("window_stride");
  if (!ww.empty() || !ws.empty()) m.meta.window = WindowSpec{to_size(ww), to_size(ws)};

  c.expect("[features]");
  const std::size_t dim = to_size(c.value("count"));
  if (dim == 0) corrupt("model has no features");
  for (std::size_t i = 0; i < dim; ++i) {
    const auto name = c.next();
    if (name.front() == '[') corrupt("feature list shorter than count");
    m.feature_names.emplace_back(name);
  }

  c.expect("[scaler]");
  if (c.peek() == "none") {
    c.next();
  } else {
    Scaler sc;
    sc.mean = to_doubles(c.value("mean"), dim);
    sc.std = to_doubles(c.value("std"), dim);
    for (double s : sc.std)
      if (s < 0.0) corrupt("negative scaler std");
    m.scaler = std::move(sc);
  }

  c.expect("[parameters]");
  switch (m.kind) {
    case ModelKind::logreg: {
      LogRegParams p;
      p.bias = to_double(c.value("bias"));
      p.weights = to_doubles(c.value("weights"), dim);
      m.params = std::move(p);
      break;
    }
    case ModelKind::tree:
    case ModelKind::forest: {
      TreeEnsemble p{read_trees(c, dim)};
      if (m.kind == ModelKind::tree && p.trees.size() != 1) corrupt("tree model must hold exactly one tree");
      m.params = std::move(p);
      break;
    }
    case ModelKind::gbm: {
      GbmParams p;
      p.base_score = to_double(c.value("base_score"));
      p.trees = read_trees(c, dim);
      m.params = std::move(p);
      break;
    }
    case ModelKind::mlp: {
      MlpParams p;
      const auto layers = csv::split_line(c.value("layers"));
      if (layers.size() != 3) corrupt("layers needs three widths");
      p.inputs = to_size(layers[0]);
      p.hidden1 = to_size(layers[1]);
      p.hidden2 = to_size(layers[2]);
      if (p.inputs != dim || p.hidden1 == 0 || p.hidden2 == 0) corrupt("layer widths do not match features");
      p.w1 = to_doubles(c.value("w1"), p.inputs * p.hidden1);
      p.b1 = to_doubles(c.value("b1"), p.hidden1);
      p.w2 = to_doubles(c.value("w2"), p.hidden1 * p.hidden2);
      p.b2 = to_doubles(c.value("b2"), p.hidden2);
      p.w3 = to_doubles(c.value("w3"), p.hidden2);
      p.b3 = to_double(c.value("b3"));
      m.params = std::move(p);
      break;
    }
  }
  if (!c.done()) corrupt("trailing data after parameters");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) { write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace gpusentinel
