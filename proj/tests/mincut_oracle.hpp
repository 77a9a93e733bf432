#pragma once

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/boykov_kolmogorov_max_flow.hpp>
#include <string>

#include "compmm/lifting.hpp"

namespace compmm::oracle {

/// Exact minimum of a LabelGrid energy by a minimum cut on the layered (Ishikawa) graph.
inline double mincut_optimum(const LabelGrid& g) {
  using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
  using Graph = boost::adjacency_list<
      boost::vecS, boost::vecS, boost::directedS,
      boost::property<boost::vertex_name_t, std::string,
                      boost::property<boost::vertex_index_t, long,
                                      boost::property<boost::vertex_color_t, boost::default_color_type,
                                                      boost::property<boost::vertex_distance_t, long,
                                                                      boost::property<boost::vertex_predecessor_t,
                                                                                      Traits::edge_descriptor>>>>>,
      boost::property<boost::edge_capacity_t, double,
                      boost::property<boost::edge_residual_capacity_t, double,
                                      boost::property<boost::edge_reverse_t, Traits::edge_descriptor>>>>;
  const std::size_t n = g.pixels(), K = g.labels - 1;
  Graph graph(n * K + 2);
  const std::size_t s = n * K, t = n * K + 1;
  auto cap = boost::get(boost::edge_capacity, graph);
  auto rev = boost::get(boost::edge_reverse, graph);
  const auto add = [&](std::size_t a, std::size_t b, double c_ab, double c_ba) {
    const auto e1 = boost::add_edge(a, b, graph).first;
    const auto e2 = boost::add_edge(b, a, graph).first;
    cap[e1] = c_ab;
    cap[e2] = c_ba;
    rev[e1] = e2;
    rev[e2] = e1;
  };
  const double big = 1e9;
  double shift = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = kInfinity;
    for (std::size_t k = 0; k <= K; ++k) lo = std::min(lo, g.cost(i, k));
    shift += lo;
    // chain s -> v_0 -> ... -> v_{K-1} -> t; cutting the l-th edge selects label l
    for (std::size_t k = 0; k <= K; ++k) {
      const std::size_t from = k == 0 ? s : i * K + k - 1;
      const std::size_t to = k == K ? t : i * K + k;
      add(from, to, g.cost(i, k) - lo, big);
    }
  }
  const double dl = g.spacing();
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c) {
      const std::size_t i = r * g.width + c;
      for (std::size_t k = 0; k < K; ++k) {
        if (c + 1 < g.width) add(i * K + k, (i + 1) * K + k, g.wx[i] * dl, g.wx[i] * dl);
        if (r + 1 < g.height) add(i * K + k, (i + g.width) * K + k, g.wy[i] * dl, g.wy[i] * dl);
      }
    }
  return shift + boost::boykov_kolmogorov_max_flow(graph, s, t);
}

}  // namespace compmm::oracle
