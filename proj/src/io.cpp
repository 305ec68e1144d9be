#include "bnncert/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace bnncert {

using nlohmann::json;

FormatError::FormatError(const std::string& source, std::size_t line, const std::string& path,
                         const std::string& reason)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + (path.empty() ? "" : path + ": ") + reason),
      line_(line),
      path_(path) {}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// Character iterator that publishes how far the parser has read.
struct TrackingIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char** cursor = nullptr;

  reference operator*() const { return *p; }
  TrackingIterator& operator++() {
    ++p;
    *cursor = p;
    return *this;
  }
  bool operator==(const TrackingIterator& o) const { return p == o.p; }
  bool operator!=(const TrackingIterator& o) const { return p != o.p; }
};

// Builds the DOM and remembers where each value started, keyed by JSON
// pointer, so that semantic errors can point at a line.
class LocatingSax {
 public:
  LocatingSax(json& root, const char** cursor, const char* begin) : dom_(root), cursor_(cursor), begin_(begin) {}

  bool null() { return scalar([&] { return dom_.null(); }); }
  bool boolean(bool v) { return scalar([&] { return dom_.boolean(v); }); }
  bool number_integer(json::number_integer_t v) { return scalar([&] { return dom_.number_integer(v); }); }
  bool number_unsigned(json::number_unsigned_t v) { return scalar([&] { return dom_.number_unsigned(v); }); }
  bool number_float(json::number_float_t v, const std::string& s) {
    return scalar([&] { return dom_.number_float(v, s); });
  }
  bool string(std::string& v) { return scalar([&] { return dom_.string(v); }); }
  bool binary(json::binary_t& v) { return scalar([&] { return dom_.binary(v); }); }

  bool start_object(std::size_t n) {
    record();
    frames_.push_back({false, 0, {}});
    return dom_.start_object(n);
  }
  bool key(std::string& k) {
    frames_.back().key = k;
    return dom_.key(k);
  }
  bool end_object() {
    frames_.pop_back();
    advance();
    return dom_.end_object();
  }
  bool start_array(std::size_t n) {
    record();
    frames_.push_back({true, 0, {}});
    return dom_.start_array(n);
  }
  bool end_array() {
    frames_.pop_back();
    advance();
    return dom_.end_array();
  }
  bool parse_error(std::size_t pos, const std::string&, const nlohmann::detail::exception& ex) {
    error_byte = pos;
    error = ex.what();
    return false;
  }

  std::unordered_map<std::string, std::size_t> offsets;
  std::optional<std::string> error;
  std::size_t error_byte = 0;

 private:
  struct Frame {
    bool array;
    std::size_t index;
    std::string key;
  };

  template <typename F>
  bool scalar(F f) {
    record();
    advance();
    return f();
  }

  void record() {
    std::string ptr;
    for (const auto& f : frames_) ptr += "/" + (f.array ? std::to_string(f.index) : f.key);
    offsets.emplace(std::move(ptr), static_cast<std::size_t>(*cursor_ - begin_));
  }
  void advance() {
    if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
  }

  nlohmann::detail::json_sax_dom_parser<json> dom_;
  const char** cursor_;
  const char* begin_;
  std::vector<Frame> frames_;
};

std::size_t line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  // The parser reads one character past a scalar; step back over trailing
  // whitespace so the line is the one the value ends on.
  while (offset > 0 && std::isspace(static_cast<unsigned char>(text[offset - 1]))) --offset;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Parsed document plus enough bookkeeping to report locations.
class Document {
 public:
  Document(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {
    const char* cursor = text.data();
    TrackingIterator first{text.data(), &cursor};
    TrackingIterator last{text.data() + text.size(), &cursor};
    LocatingSax sax(root_, &cursor, text.data());
    if (!json::sax_parse(first, last, &sax)) {
      const std::string& what = sax.error.value_or("parse error");
      const auto pos = what.find("parse error");
      throw FormatError(source_, line_of(text_, sax.error_byte), "", pos == std::string::npos ? what : what.substr(pos));
    }
    offsets_ = std::move(sax.offsets);
  }

  const json& root() const { return root_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const std::string& pointer, const std::string& reason) const {
    // Fall back to the nearest recorded ancestor if the value itself is
    // missing.
    std::string p = pointer;
    auto it = offsets_.find(p);
    while (it == offsets_.end() && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      it = offsets_.find(p);
    }
    const std::size_t line = it == offsets_.end() ? 1 : line_of(text_, it->second);
    throw FormatError(source_, line, display(pointer), reason);
  }

 private:
  // "/layers/1/weights_var/2/0" -> "layers[1].weights_var[2][0]"
  static std::string display(const std::string& pointer) {
    std::string out;
    std::size_t i = 0;
    while (i < pointer.size()) {
      const std::size_t next = pointer.find('/', i + 1);
      const std::string seg = pointer.substr(i + 1, next == std::string::npos ? std::string::npos : next - i - 1);
      const bool index = !seg.empty() && std::all_of(seg.begin(), seg.end(), ::isdigit);
      if (index) {
        out += "[" + seg + "]";
      } else {
        out += (out.empty() ? "" : ".") + seg;
      }
      i = next == std::string::npos ? pointer.size() : next;
    }
    return out;
  }

  const std::string& text_;
  std::string source_;
  json root_;
  std::unordered_map<std::string, std::size_t> offsets_;
};

std::string child(const std::string& p, const std::string& key) { return p + "/" + key; }
std::string child(const std::string& p, std::size_t i) { return p + "/" + std::to_string(i); }

const json& member(const Document& doc, const json& obj, const std::string& p, const std::string& key) {
  if (!obj.is_object()) doc.fail(p, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) doc.fail(p, "missing field '" + key + "'");
  return *it;
}

double number(const Document& doc, const json& v, const std::string& p) {
  if (!v.is_number()) doc.fail(p, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) doc.fail(p, "non-finite number");
  return d;
}

std::size_t count(const Document& doc, const json& v, const std::string& p) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) doc.fail(p, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> vector_of(const Document& doc, const json& v, const std::string& p) {
  if (!v.is_array()) doc.fail(p, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(doc, v[i], child(p, i)));
  return out;
}

Matrix matrix_of(const Document& doc, const json& v, const std::string& p) {
  if (!v.is_array() || v.empty()) doc.fail(p, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  std::vector<double> data;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = vector_of(doc, v[r], child(p, r));
    if (r == 0) cols = row.size();
    if (row.size() != cols)
      doc.fail(child(p, r), "row has " + std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    data.insert(data.end(), row.begin(), row.end());
  }
  if (cols == 0) doc.fail(p, "rows are empty");
  return Matrix(rows, cols, std::move(data));
}

void check_variances(const Document& doc, const std::vector<double>& v, const std::string& p, std::size_t cols) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) {
      const std::string where = cols == 0 ? child(p, i) : child(child(p, i / cols), i % cols);
      doc.fail(where, "negative variance " + format_double(v[i]));
    }
  }
}

BnnModel model_from(const Document& doc) {
  const json& root = doc.root();
  const std::size_t version = count(doc, member(doc, root, "", "format_version"), "/format_version");
  if (version != kModelFormatVersion)
    doc.fail("/format_version", "unsupported format version " + std::to_string(version));
  const std::size_t input_dim = count(doc, member(doc, root, "", "input_dim"), "/input_dim");
  const json& layers = member(doc, root, "", "layers");
  if (!layers.is_array() || layers.size() < 2)
    doc.fail("/layers", "expected at least two layers (hidden and output)");

  std::vector<LayerPosterior> out;
  std::size_t prev = input_dim;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string p = child("/layers", k);
    const json& l = layers[k];
    LayerPosterior layer;
    layer.weight_mean = matrix_of(doc, member(doc, l, p, "weights_mean"), child(p, "weights_mean"));
    layer.weight_var = matrix_of(doc, member(doc, l, p, "weights_var"), child(p, "weights_var"));
    layer.bias_mean = vector_of(doc, member(doc, l, p, "bias_mean"), child(p, "bias_mean"));
    layer.bias_var = vector_of(doc, member(doc, l, p, "bias_var"), child(p, "bias_var"));
    const json& act = member(doc, l, p, "activation");
    if (!act.is_string()) doc.fail(child(p, "activation"), "expected a string");
    try {
      layer.activation = activation_from_string(act.get<std::string>());
    } catch (const std::invalid_argument& e) {
      doc.fail(child(p, "activation"), e.what());
    }

    const std::size_t rows = layer.weight_mean.rows();
    const std::size_t cols = layer.weight_mean.cols();
    if (cols != prev)
      doc.fail(child(p, "weights_mean"),
               "layer takes " + std::to_string(cols) + " inputs but receives " + std::to_string(prev));
    if (layer.weight_var.rows() != rows || layer.weight_var.cols() != cols)
      doc.fail(child(p, "weights_var"), "shape differs from weights_mean");
    if (layer.bias_mean.size() != rows)
      doc.fail(child(p, "bias_mean"), "length " + std::to_string(layer.bias_mean.size()) + ", expected " +
                                          std::to_string(rows));
    if (layer.bias_var.size() != rows)
      doc.fail(child(p, "bias_var"), "length " + std::to_string(layer.bias_var.size()) + ", expected " +
                                         std::to_string(rows));
    check_variances(doc, layer.weight_var.data(), child(p, "weights_var"), cols);
    check_variances(doc, layer.bias_var, child(p, "bias_var"), 0);
    if (k + 1 == layers.size() && layer.activation != ActivationKind::Identity)
      doc.fail(child(p, "activation"), "output layer must use the identity activation");
    prev = rows;
    out.push_back(std::move(layer));
  }
  return BnnModel(std::move(out));
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

IntervalBox box_of(const Document& doc, const json& v, const std::string& p) {
  if (!v.is_array() || v.empty()) doc.fail(p, "expected a non-empty array of [lo, hi] pairs");
  std::vector<Interval> dims;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto pair = vector_of(doc, v[i], child(p, i));
    if (pair.size() != 2) doc.fail(child(p, i), "expected [lo, hi]");
    if (!(pair[0] <= pair[1])) doc.fail(child(p, i), "lower end exceeds upper end");
    dims.emplace_back(pair[0], pair[1]);
  }
  return IntervalBox(std::move(dims));
}

InputRegion region_from(const Document& doc, const json& r, const std::string& p) {
  if (!r.is_object()) doc.fail(p, "expected an object");
  std::vector<IntervalBox> boxes;
  if (r.contains("box")) {
    boxes.push_back(box_of(doc, r["box"], child(p, "box")));
  } else if (r.contains("boxes")) {
    const json& list = r["boxes"];
    if (!list.is_array() || list.empty()) doc.fail(child(p, "boxes"), "expected a non-empty array of boxes");
    for (std::size_t i = 0; i < list.size(); ++i) boxes.push_back(box_of(doc, list[i], child(child(p, "boxes"), i)));
  } else if (r.contains("linf_ball")) {
    const std::string q = child(p, "linf_ball");
    const json& ball = r["linf_ball"];
    const auto center = vector_of(doc, member(doc, ball, q, "center"), child(q, "center"));
    const double eps = number(doc, member(doc, ball, q, "epsilon"), child(q, "epsilon"));
    if (eps < 0.0) doc.fail(child(q, "epsilon"), "epsilon must be non-negative");
    std::optional<Interval> clip;
    if (ball.contains("clip")) {
      const auto c = vector_of(doc, ball["clip"], child(q, "clip"));
      if (c.size() != 2 || !(c[0] <= c[1])) doc.fail(child(q, "clip"), "expected [lo, hi]");
      clip = Interval(c[0], c[1]);
    }
    boxes.push_back(linf_ball(center, eps, clip));
  } else {
    doc.fail(p, "expected one of 'box', 'boxes' or 'linf_ball'");
  }
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    if (boxes[i].dim() != boxes[0].dim()) doc.fail(child(child(p, "boxes"), i), "box dimension differs");
  }
  try {
    return InputRegion(std::move(boxes));
  } catch (const std::invalid_argument& e) {
    doc.fail(p, e.what());
  }
}

SafetySpec spec_from(const Document& doc, const json& s, const std::string& p) {
  if (!s.is_object()) doc.fail(p, "expected an object");
  if (s.contains("band")) {
    const double delta = number(doc, s["band"], child(p, "band"));
    if (!(delta > 0.0)) doc.fail(child(p, "band"), "band half-width must be positive");
    return band_spec(delta);
  }
  if (s.contains("classification")) {
    const std::string q = child(p, "classification");
    const json& c = s["classification"];
    const std::size_t n = count(doc, member(doc, c, q, "n_classes"), child(q, "n_classes"));
    const std::size_t k = count(doc, member(doc, c, q, "predicted"), child(q, "predicted"));
    if (n == 0 || k >= n) doc.fail(child(q, "predicted"), "predicted class outside [0, n_classes)");
    return classification_spec(n, k);
  }
  if (s.contains("matrix")) {
    Matrix c = matrix_of(doc, s["matrix"], child(p, "matrix"));
    auto d = vector_of(doc, member(doc, s, p, "offset"), child(p, "offset"));
    if (d.size() != c.rows()) doc.fail(child(p, "offset"), "length differs from the number of matrix rows");
    return {std::move(c), std::move(d)};
  }
  doc.fail(p, "expected one of 'band', 'classification' or 'matrix'");
}

}  // namespace

BnnModel parse_model(const std::string& text, const std::string& source) {
  const Document doc(text, source);
  return model_from(doc);
}

BnnModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path), path.string()); }

std::string dump_model(const BnnModel& model, const json& metadata) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["input_dim"] = model.input_dim();
  doc["layers"] = json::array();
  for (const auto& l : model.layers()) {
    doc["layers"].push_back({{"weights_mean", matrix_json(l.weight_mean)},
                             {"weights_var", matrix_json(l.weight_var)},
                             {"bias_mean", l.bias_mean},
                             {"bias_var", l.bias_var},
                             {"activation", to_string(l.activation)}});
  }
  doc["metadata"] = metadata;
  return doc.dump(1) + "\n";
}

void save_model(const std::filesystem::path& path, const BnnModel& model, const json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << dump_model(model, metadata);
}

Property parse_property(const std::string& text, const std::string& source, const BnnModel* model) {
  const Document doc(text, source);
  Property prop{region_from(doc, member(doc, doc.root(), "", "region"), "/region"),
                spec_from(doc, member(doc, doc.root(), "", "spec"), "/spec")};
  if (model) {
    if (prop.region.dim() != model->input_dim())
      doc.fail("/region", "input dimension " + std::to_string(prop.region.dim()) + " but the model takes " +
                              std::to_string(model->input_dim()));
    if (prop.spec.output_dim() != model->output_dim())
      doc.fail("/spec", "spec has " + std::to_string(prop.spec.output_dim()) + " columns but the model has " +
                            std::to_string(model->output_dim()) + " outputs");
  }
  return prop;
}

Property load_property(const std::filesystem::path& path, const BnnModel* model) {
  return parse_property(read_text_file(path), path.string(), model);
}

std::vector<IntervalBox> parse_weight_boxes(const std::string& text, const std::string& source) {
  const Document doc(text, source);
  const json& list = member(doc, doc.root(), "", "boxes");
  if (!list.is_array() || list.empty()) doc.fail("/boxes", "expected a non-empty array of boxes");
  std::vector<IntervalBox> out;
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(box_of(doc, list[i], child("/boxes", i)));
  return out;
}

std::vector<IntervalBox> load_weight_boxes(const std::filesystem::path& path) {
  return parse_weight_boxes(read_text_file(path), path.string());
}

json config_to_json(const CertifyConfig& cfg) {
  return {{"method", to_string(cfg.method)},
          {"samples", cfg.n_samples},
          {"margin", cfg.weight_margin},
          {"margin_semantics", to_string(cfg.margin_semantics)},
          {"seed", cfg.seed},
          {"fragment_budget", cfg.fragment_budget},
          {"anchors", to_string(cfg.lbp.anchors)}};
}

json result_to_json(const CertificationResult& r, bool include_timing) {
  json out = {{"p_lower", r.p_lower},
              {"accepted", r.accepted},
              {"rejected", r.rejected},
              {"rectangles", r.safe_set.rectangles.size()},
              {"per_box_mass", r.per_box_mass}};
  if (include_timing) out["wall_time"] = r.wall_time;
  return out;
}

std::string sweep_csv_line(const SweepRow& row) {
  return to_string(row.method) + "," + std::to_string(row.n_samples) + "," + format_double(row.gamma) + "," +
         std::to_string(row.seed) + "," + format_double(row.p_lower) + "," + std::to_string(row.accepted) + "," +
         std::to_string(row.rejected) + "," + format_double(row.seconds);
}

}  // namespace bnncert
