#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bdlab/common.hpp"
#include "bdlab/models.hpp"

// Checkpoint layout: one header line `arch d H C s`, then whitespace-separated
// weights. Classifier arch tags are `gcn:<act>` / `gin:<act>` with s = 0 and
// weights W1 (row-major), W2, then gin_eps. Generators use `gen:<act>` with
// C = 0 and weights W1, b1, W2, b2.

namespace bdlab::models {

namespace {

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

double read_value(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  if (!(in >> tok)) throw ParseError(path.string() + ": truncated weights");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size()) throw ParseError(path.string() + ": bad weight '" + tok + "'");
  if (!std::isfinite(v)) throw ParseError(path.string() + ": non-finite weight");
  return v;
}

DenseMatrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols, const std::filesystem::path& path) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = read_value(in, path);
  return m;
}

struct Header {
  std::string kind;
  Activation act;
  std::size_t d, h, c, s;
};

Header read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty checkpoint");
  std::istringstream ss(line);
  std::string tag;
  long long d = -1, h = -1, c = -1, s = -1;
  if (!(ss >> tag >> d >> h >> c >> s) || d < 1 || h < 1 || c < 0 || s < 0) {
    throw ParseError(path.string() + ":1: header must be `arch d H C s`");
  }
  const auto colon = tag.find(':');
  if (colon == std::string::npos) throw ParseError(path.string() + ":1: arch tag needs ':<activation>'");
  Header hd;
  hd.kind = tag.substr(0, colon);
  try {
    hd.act = grad::parse_activation(tag.substr(colon + 1));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ":1: " + e.what());
  }
  hd.d = static_cast<std::size_t>(d);
  hd.h = static_cast<std::size_t>(h);
  hd.c = static_cast<std::size_t>(c);
  hd.s = static_cast<std::size_t>(s);
  return hd;
}

void expect_end(std::istream& in, const std::filesystem::path& path) {
  std::string extra;
  if (in >> extra) throw ParseError(path.string() + ": trailing data after weights");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

void save_classifier(const ClassifierParams& p, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << arch_name(p.arch) << ':' << grad::activation_name(p.act) << ' ' << p.input_dim() << ' ' << p.hidden_dim()
      << ' ' << p.num_classes() << " 0\n";
  write_matrix(out, p.w1);
  write_matrix(out, p.w2);
  write_matrix(out, DenseMatrix(1, 1, p.gin_eps));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ClassifierParams load_classifier(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto hd = read_header(in, path);
  ClassifierParams p;
  try {
    p.arch = parse_arch(hd.kind);
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ":1: " + e.what());
  }
  if (hd.c < 1) throw ParseError(path.string() + ":1: classifier needs C >= 1");
  p.act = hd.act;
  p.w1 = read_matrix(in, hd.d, hd.h, path);
  p.w2 = read_matrix(in, hd.h, hd.c, path);
  p.gin_eps = read_value(in, path);
  expect_end(in, path);
  return p;
}

void save_generator(const GeneratorParams& g, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "gen:" << grad::activation_name(g.act) << ' ' << g.input_dim() << ' ' << g.hidden_dim() << " 0 "
      << g.trigger_size << '\n';
  write_matrix(out, g.w1);
  write_matrix(out, g.b1);
  write_matrix(out, g.w2);
  write_matrix(out, g.b2);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GeneratorParams load_generator(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto hd = read_header(in, path);
  if (hd.kind != "gen") throw ParseError(path.string() + ":1: expected a generator checkpoint");
  if (hd.s < 1) throw ParseError(path.string() + ":1: trigger size must be >= 1");
  GeneratorParams g;
  g.act = hd.act;
  g.trigger_size = hd.s;
  const std::size_t width = generator_output_width(hd.s, hd.d);
  g.w1 = read_matrix(in, hd.d, hd.h, path);
  g.b1 = read_matrix(in, 1, hd.h, path);
  g.w2 = read_matrix(in, hd.h, width, path);
  g.b2 = read_matrix(in, 1, width, path);
  expect_end(in, path);
  return g;
}

}  // namespace bdlab::models
