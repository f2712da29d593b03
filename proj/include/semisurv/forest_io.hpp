#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "semisurv/forest.hpp"
#include "semisurv/io.hpp"

namespace semisurv {

// Line-oriented text format, doubles in shortest round-trip form:
//
//   semisurv-forest 1
//   features <p> horizon <h>
//   config <n_trees> <mtry_fraction> <min_leaf_events> <max_depth|-> <seed>
//   tree <node count> <leaf count>
//   n <feature> <threshold> <score> <left> <right>     one per internal node
//   l <leaf index>                                    one per terminal node
//   leaf <size> <lifetime> <k> <knot_1> <value_1> ... <knot_k> <value_k>
//   end

inline constexpr int kForestFormatVersion = 1;

inline void save_forest(std::ostream& out, const Forest& forest) {
  const auto& c = forest.config;
  out << "semisurv-forest " << kForestFormatVersion << '\n';
  out << "features " << forest.feature_count << " horizon " << format_exact(forest.training_horizon) << '\n';
  out << "config " << c.n_trees << ' ' << format_exact(c.mtry_fraction) << ' ' << c.min_leaf_events << ' '
      << (c.max_depth ? std::to_string(*c.max_depth) : std::string("-")) << ' ' << c.seed << '\n';
  for (const auto& tree : forest.trees) {
    out << "tree " << tree.nodes.size() << ' ' << tree.leaves.size() << '\n';
    for (const auto& n : tree.nodes) {
      if (n.terminal())
        out << "l " << n.left << '\n';
      else
        out << "n " << n.feature << ' ' << format_exact(n.threshold) << ' ' << format_exact(n.score) << ' ' << n.left
            << ' ' << n.right << '\n';
    }
    for (const auto& leaf : tree.leaves) {
      out << "leaf " << leaf.size << ' ' << format_exact(leaf.lifetime) << ' ' << leaf.chf.size();
      for (std::size_t i = 0; i < leaf.chf.size(); ++i)
        out << ' ' << format_exact(leaf.chf.knots()[i]) << ' ' << format_exact(leaf.chf.values()[i]);
      out << '\n';
    }
  }
  out << "end\n";
}

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw Error("forest file: unexpected end of input");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw Error("forest file: expected '" + w + "', found '" + got + "'");
  }
  double real() {
    const std::string w = word();
    double v = 0.0;
    if (!parse_double(w, v)) throw Error("forest file: bad number '" + w + "'");
    return v;
  }
  template <typename T>
  T integer() {
    const std::string w = word();
    T v{};
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size()) throw Error("forest file: bad integer '" + w + "'");
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace detail

inline Forest load_forest(std::istream& in) {
  detail::TokenReader rd(in);
  rd.expect("semisurv-forest");
  const int version = rd.integer<int>();
  if (version != kForestFormatVersion) throw Error("forest file: unsupported version " + std::to_string(version));

  Forest forest;
  rd.expect("features");
  forest.feature_count = rd.integer<std::size_t>();
  rd.expect("horizon");
  forest.training_horizon = rd.real();
  rd.expect("config");
  auto& c = forest.config;
  c.n_trees = rd.integer<std::size_t>();
  c.mtry_fraction = rd.real();
  c.min_leaf_events = rd.integer<std::size_t>();
  const std::string depth = rd.word();
  if (depth != "-") {
    std::size_t d = 0;
    const auto [ptr, ec] = std::from_chars(depth.data(), depth.data() + depth.size(), d);
    if (ec != std::errc{} || ptr != depth.data() + depth.size()) throw Error("forest file: bad max_depth");
    c.max_depth = d;
  }
  c.seed = rd.integer<std::uint64_t>();
  c.validate();

  forest.trees.resize(c.n_trees);
  for (auto& tree : forest.trees) {
    rd.expect("tree");
    tree.nodes.resize(rd.integer<std::size_t>());
    tree.leaves.resize(rd.integer<std::size_t>());
    for (auto& n : tree.nodes) {
      const std::string kind = rd.word();
      if (kind == "l") {
        n.feature = SurvivalTree::kLeaf;
        n.left = rd.integer<std::uint32_t>();
        if (n.left >= tree.leaves.size()) throw Error("forest file: leaf index out of range");
      } else if (kind == "n") {
        n.feature = rd.integer<std::uint32_t>();
        if (n.feature >= forest.feature_count) throw Error("forest file: feature index out of range");
        n.threshold = rd.real();
        n.score = rd.real();
        n.left = rd.integer<std::uint32_t>();
        n.right = rd.integer<std::uint32_t>();
        if (n.left >= tree.nodes.size() || n.right >= tree.nodes.size())
          throw Error("forest file: child index out of range");
      } else {
        throw Error("forest file: unknown node kind '" + kind + "'");
      }
    }
    for (auto& leaf : tree.leaves) {
      rd.expect("leaf");
      leaf.size = rd.integer<std::size_t>();
      leaf.lifetime = rd.real();
      const auto k = rd.integer<std::size_t>();
      std::vector<double> knots(k), values(k);
      for (std::size_t i = 0; i < k; ++i) {
        knots[i] = rd.real();
        values[i] = rd.real();
      }
      leaf.chf = StepCurve(std::move(knots), std::move(values), 0.0);
      if (!leaf.chf.is_chf()) throw Error("forest file: leaf hazard is not a CHF");
    }
  }
  rd.expect("end");
  return forest;
}

inline void save_forest(const std::string& path, const Forest& forest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  save_forest(out, forest);
  if (!out) throw Error("write failed for '" + path + "'");
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open forest '" + path + "'");
  return load_forest(in);
}

}  // namespace semisurv
