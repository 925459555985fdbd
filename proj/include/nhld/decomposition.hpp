#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "nhld/chain.hpp"
#include "nhld/errors.hpp"

namespace nhld {

enum class BlockClass { DegenerateTransient, NondegenerateTransient, Stochastic };

inline const char* block_class_name(BlockClass c) {
  switch (c) {
    case BlockClass::DegenerateTransient: return "degenerate-transient";
    case BlockClass::NondegenerateTransient: return "nondegenerate-transient";
    case BlockClass::Stochastic: return "stochastic";
  }
  return "?";
}

// Canonical upper block form of a stochastic limit matrix: communicating
// classes ordered so the reordered matrix is block upper-triangular, with all
// transient blocks ahead of the stochastic ones.
struct CanonicalDecomposition {
  std::vector<std::vector<int>> blocks;  // C_1..C_{N+M}, states in ascending order
  std::vector<BlockClass> cls;
  std::vector<int> D, N_set, M_set, G;   // 0-based block indices
  std::vector<int> state_order;          // permutation realizing the upper block form
  std::vector<int> block_of_state;
  double p_min = 0.0;                    // smallest positive within-block entry over G
  int N = 0;                             // |D|
  int M = 0;                             // |G|

  size_t block_count() const { return blocks.size(); }
  bool in_G(int b) const { return cls[b] != BlockClass::DegenerateTransient; }
};

namespace detail {

// Tarjan's strongly connected components, iterative. Emits components in
// reverse topological order of the condensation.
inline std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0), stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;
  // explicit DFS stack: (vertex, next edge position)
  std::vector<std::pair<int, size_t>> dfs;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    dfs.push_back({root, 0});
    while (!dfs.empty()) {
      auto& [v, pos] = dfs.back();
      if (pos == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (pos < adj[v].size()) {
        int w = adj[v][pos++];
        if (index[w] == -1) {
          dfs.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<int> comp;
        while (true) {
          int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
          if (w == v) break;
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      int finished = v;
      dfs.pop_back();
      if (!dfs.empty()) low[dfs.back().first] = std::min(low[dfs.back().first], low[finished]);
    }
  }
  return comps;
}

}  // namespace detail

inline CanonicalDecomposition decompose(const TransitionMatrix& P) {
  P.validate("decompose");
  int r = static_cast<int>(P.n);

  std::vector<std::vector<int>> adj(r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (P(i, j) > kZeroEntry) adj[i].push_back(j);

  auto comps = detail::strongly_connected_components(adj);
  int nc = static_cast<int>(comps.size());

  std::vector<int> comp_of(r, -1);
  for (int c = 0; c < nc; ++c)
    for (int s : comps[c]) comp_of[s] = c;

  // classify
  std::vector<BlockClass> cls(nc);
  for (int c = 0; c < nc; ++c) {
    const auto& states = comps[c];
    bool closed = true;
    for (int s : states)
      for (int t : adj[s])
        if (comp_of[t] != c) closed = false;
    if (closed) {
      cls[c] = BlockClass::Stochastic;
    } else if (states.size() == 1 && P(states[0], states[0]) <= kZeroEntry) {
      cls[c] = BlockClass::DegenerateTransient;  // returns impossible
    } else {
      cls[c] = BlockClass::NondegenerateTransient;
    }
  }

  // Order: transient components topologically (Kahn with smallest-state
  // tie-break), then stochastic components by smallest state. Stochastic
  // components are sinks, so this always yields an upper block form.
  std::vector<std::vector<int>> cadj(nc);
  std::vector<int> indeg(nc, 0);
  for (int i = 0; i < r; ++i)
    for (int j : adj[i]) {
      int a = comp_of[i], b = comp_of[j];
      if (a == b) continue;
      if (cls[a] == BlockClass::Stochastic || cls[b] == BlockClass::Stochastic) continue;
      cadj[a].push_back(b);
    }
  for (int c = 0; c < nc; ++c) {
    std::sort(cadj[c].begin(), cadj[c].end());
    cadj[c].erase(std::unique(cadj[c].begin(), cadj[c].end()), cadj[c].end());
    for (int b : cadj[c]) ++indeg[b];
  }

  std::vector<int> order;
  {
    std::vector<int> ready;
    for (int c = 0; c < nc; ++c)
      if (cls[c] != BlockClass::Stochastic && indeg[c] == 0) ready.push_back(c);
    auto by_min_state = [&](int a, int b) { return comps[a][0] < comps[b][0]; };
    std::sort(ready.begin(), ready.end(), by_min_state);
    while (!ready.empty()) {
      int c = ready.front();
      ready.erase(ready.begin());
      order.push_back(c);
      for (int b : cadj[c])
        if (--indeg[b] == 0) {
          ready.insert(std::upper_bound(ready.begin(), ready.end(), b, by_min_state), b);
        }
    }
    std::vector<int> sinks;
    for (int c = 0; c < nc; ++c)
      if (cls[c] == BlockClass::Stochastic) sinks.push_back(c);
    std::sort(sinks.begin(), sinks.end(), by_min_state);
    order.insert(order.end(), sinks.begin(), sinks.end());
  }

  CanonicalDecomposition dec;
  dec.block_of_state.assign(r, -1);
  for (int pos = 0; pos < nc; ++pos) {
    int c = order[pos];
    dec.blocks.push_back(comps[c]);
    dec.cls.push_back(cls[c]);
    for (int s : comps[c]) {
      dec.state_order.push_back(s);
      dec.block_of_state[s] = pos;
    }
    switch (cls[c]) {
      case BlockClass::DegenerateTransient: dec.D.push_back(pos); break;
      case BlockClass::NondegenerateTransient: dec.N_set.push_back(pos); dec.G.push_back(pos); break;
      case BlockClass::Stochastic: dec.M_set.push_back(pos); dec.G.push_back(pos); break;
    }
  }
  dec.N = static_cast<int>(dec.D.size());
  dec.M = static_cast<int>(dec.G.size());

  double pmin = std::numeric_limits<double>::infinity();
  for (int b : dec.G)
    for (int s : dec.blocks[b])
      for (int t : dec.blocks[b])
        if (P(s, t) > kZeroEntry) pmin = std::min(pmin, P(s, t));
  dec.p_min = pmin;
  return dec;
}

// Common period of an irreducible block: gcd of (level(u)+1-level(v)) over
// all block edges u->v, levels from a BFS.
inline int period(const TransitionMatrix& P, const std::vector<int>& block) {
  int k = static_cast<int>(block.size());
  if (k == 0) throw error(errc::not_irreducible, "period of an empty block");
  std::vector<int> pos(P.n, -1);
  for (int i = 0; i < k; ++i) pos[block[i]] = i;

  std::vector<int> level(k, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  size_t head = 0;
  long long g = 0;
  while (head < queue.size()) {
    int u = queue[head++];
    for (int j = 0; j < k; ++j) {
      if (P(block[u], block[j]) <= kZeroEntry) continue;
      if (level[j] == -1) {
        level[j] = level[u] + 1;
        queue.push_back(j);
      } else {
        g = std::gcd(g, static_cast<long long>(level[u]) + 1 - level[j]);
      }
    }
  }
  for (int j = 0; j < k; ++j)
    if (level[j] == -1) throw error(errc::not_irreducible, "block is not irreducible");
  // reverse reachability must also hold for irreducibility
  {
    std::vector<int> seen(k, 0);
    std::vector<int> st{0};
    seen[0] = 1;
    while (!st.empty()) {
      int u = st.back();
      st.pop_back();
      for (int j = 0; j < k; ++j)
        if (!seen[j] && P(block[j], block[u]) > kZeroEntry) {
          seen[j] = 1;
          st.push_back(j);
        }
    }
    for (int j = 0; j < k; ++j)
      if (!seen[j]) throw error(errc::not_irreducible, "block is not irreducible");
  }
  if (g == 0) throw error(errc::not_irreducible, "block has no cycle");
  return static_cast<int>(std::abs(g));
}

// Primitivity via boolean powers up to the Wielandt exponent (k-1)^2+1: the
// matrix is primitive iff that power is entrywise positive.
inline bool is_primitive(const TransitionMatrix& P, const std::vector<int>& block) {
  int k = static_cast<int>(block.size());
  if (k == 0) return false;
  std::vector<uint8_t> a(k * k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a[i * k + j] = P(block[i], block[j]) > kZeroEntry ? 1 : 0;

  long long target = static_cast<long long>(k - 1) * (k - 1) + 1;
  auto mul = [&](const std::vector<uint8_t>& x, const std::vector<uint8_t>& y) {
    std::vector<uint8_t> z(k * k, 0);
    for (int i = 0; i < k; ++i)
      for (int l = 0; l < k; ++l)
        if (x[i * k + l])
          for (int j = 0; j < k; ++j) z[i * k + j] |= y[l * k + j];
    return z;
  };
  std::vector<uint8_t> pow = a, acc;
  long long e = target;
  bool first = true;
  while (e > 0) {
    if (e & 1) {
      acc = first ? pow : mul(acc, pow);
      first = false;
    }
    e >>= 1;
    if (e > 0) pow = mul(pow, pow);
  }
  for (uint8_t v : acc)
    if (!v) return false;
  return true;
}

// --------------------------------------------------------------------------
// Assumption-C star matrices and the SIE-1 check.

struct StarMatrices {
  std::vector<TransitionMatrix> pstar;  // aligned with dec.G
  std::vector<bool> primitive;
  bool all_primitive = true;
};

namespace detail {

// Estimated liminf rate of (1/n) log p_n(s,t) over a sampled window, used to
// decide whether a vanished entry decays subexponentially. The window cannot
// decide a true liminf; closed-form families are handled analytically.
inline bool entry_rate_is_zero(const Schedule& s, int x, int y, uint64_t window) {
  if (s.family == ScheduleFamily::Metropolis) {
    const auto& ms = std::get<MetropolisSpec>(s.params);
    if (ms.proposal(x, y) <= kZeroEntry) return false;
    double up = std::max(ms.energy[y] - ms.energy[x], 0.0);
    if (auto lim = ms.cooling.beta_over_n_limit()) {
      ExtReal rate = ext_mul(ExtReal(-up), *lim);
      return rate.v == 0.0;
    }
  }
  if (s.family == ScheduleFamily::Constant) return false;  // vanished entries stay at 0
  // sampled estimate: fitted slope of log p_n over the tail must exceed -10/W
  uint64_t W = std::max<uint64_t>(window, 16);
  std::vector<uint64_t> ns;
  for (uint64_t n = std::max<uint64_t>(1, W - W / 5); n <= W; n += std::max<uint64_t>(1, W / 100))
    ns.push_back(n);
  double tol_rate = 10.0 / static_cast<double>(W);
  double worst = 0.0;
  for (uint64_t n : ns) {
    double lp = schedule_log_matrix(s, n)[static_cast<size_t>(x) * s.r + y];
    if (lp == neg_infinity()) return false;
    worst = std::min(worst, lp / static_cast<double>(n));
  }
  return worst >= -tol_rate;
}

}  // namespace detail

// P*(i) per Assumption C: keep surviving entries, promote vanished entries
// whose decay rate is zero to 1, zero out the rest.
inline StarMatrices star_matrices(const Schedule& s, const CanonicalDecomposition& dec,
                                  uint64_t window = 10000) {
  StarMatrices out;
  for (int b : dec.G) {
    const auto& states = dec.blocks[b];
    int k = static_cast<int>(states.size());
    TransitionMatrix ps(k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double p = s.limit(states[i], states[j]);
        if (p > kZeroEntry)
          ps(i, j) = p;
        else if (detail::entry_rate_is_zero(s, states[i], states[j], window))
          ps(i, j) = 1.0;
        else
          ps(i, j) = 0.0;
      }
    std::vector<int> all(k);
    std::iota(all.begin(), all.end(), 0);
    bool prim = is_primitive(ps, all);
    out.pstar.push_back(std::move(ps));
    out.primitive.push_back(prim);
    out.all_primitive = out.all_primitive && prim;
  }
  return out;
}

struct Sie1Report {
  bool ok = true;
  std::vector<int> starved_blocks;              // i in G with pi(C_i) = 0
  std::vector<std::pair<int, int>> missing;     // within-block entries absent at some n in 1..W
};

// Condition SIE-1 with n0 = 1: pi charges every block in G and the first-step
// kernels already support the limit's within-block edges (sampled n = 1..W).
inline Sie1Report check_sie1(const Schedule& s, const CanonicalDecomposition& dec,
                             uint64_t window = 128) {
  Sie1Report rep;
  for (int b : dec.G) {
    double mass = 0.0;
    for (int st : dec.blocks[b]) mass += s.pi[st];
    if (mass <= 0.0) {
      rep.ok = false;
      rep.starved_blocks.push_back(b);
    }
  }
  std::vector<std::pair<int, int>> watched;
  for (int b : dec.G)
    for (int x : dec.blocks[b])
      for (int y : dec.blocks[b])
        if (s.limit(x, y) > kZeroEntry) watched.push_back({x, y});
  std::vector<bool> dead(watched.size(), false);
  for (uint64_t n = 1; n <= window; ++n) {
    TransitionMatrix m = schedule_matrix(s, n);
    for (size_t w = 0; w < watched.size(); ++w)
      if (!dead[w] && m(watched[w].first, watched[w].second) <= kZeroEntry) dead[w] = true;
  }
  for (size_t w = 0; w < watched.size(); ++w)
    if (dead[w]) {
      rep.ok = false;
      rep.missing.push_back(watched[w]);
    }
  return rep;
}

}  // namespace nhld
