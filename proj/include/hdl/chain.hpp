#pragma once

// Homoclinic covers of annuli and chain certification. A chain is an ordered
// list of annuli whose energy intervals overlap consecutively; certifying it
// means exhibiting transverse heteroclinic connections both ways on a grid of
// overlap energies, plus the singular-annulus connections for a generalized
// chain. Edges that fail keep the report honest: they are marked, the chain
// is reported uncertified, and nothing is thrown for a missing connection.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdl/singular.hpp"

namespace hdl {

struct GapInIntervals : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solve the annulus's family at an exact energy, staying on the section the
// annulus was continued with so chart data remains comparable. Adaptive
// marches can leave large gaps between stored anchors, so walk the family in
// capped energy steps rather than trusting one Newton solve across the gap.
inline PeriodicOrbit annulus_orbit_at(const TrigPotential& U, const Annulus& a, double e,
                                      const OrbitOpts& base = {}, double coupling = 1.0) {
  const PeriodicOrbit& near = a.orbit_near(e);
  OrbitOpts opts = base;
  opts.h = near.h;
  opts.section = &near.section;
  const double cap = 0.25;
  State<2> guess = near.anchor;
  double e_cur = near.energy;
  while (std::abs(e - e_cur) > cap) {
    e_cur += std::copysign(cap, e - e_cur);
    guess = find_periodic_orbit(U, a.c, e_cur, guess, opts, coupling).anchor;
  }
  return find_periodic_orbit(U, a.c, e, guess, opts, coupling);
}

// Spec'd entry point: witnesses for the annulus family at energy e, on the
// annulus's own section.
inline std::vector<HomoclinicWitness> find_homoclinic(const TrigPotential& U,
                                                      const Annulus& a, double e,
                                                      const HomoclinicOpts& opts = {},
                                                      double coupling = 1.0) {
  return find_homoclinic(annulus_orbit_at(U, a, e, OrbitOpts{}, coupling), U, opts,
                         coupling);
}

struct CoverOpts {
  int subintervals = 3;   // number of I_i*
  int grid_per_sub = 3;   // energies certified inside each I_i*
  double inset = 0.02;    // fraction of the span kept away from the endpoints
  HomoclinicOpts hom{};
};

// Build the homoclinic cover of an annulus over [lo, hi]: overlapping
// subintervals I_i* = [b_i, b_(i+2)], each certified on a finite energy grid;
// overlap energies must carry two geometrically distinct witnesses. Non-
// adjacent subintervals are shrunk apart by a hair so they stay disjoint.
inline void build_homoclinic_cover(const TrigPotential& U, Annulus& a, double lo,
                                   double hi, const CoverOpts& opts = {},
                                   double coupling = 1.0) {
  if (!(lo < hi) || lo < a.e_lo - 1e-12 || hi > a.e_hi + 1e-12)
    throw std::invalid_argument("cover range must sit inside the annulus interval");
  const int K = opts.subintervals;
  if (K < 1 || opts.grid_per_sub < 2)
    throw std::invalid_argument("cover needs >= 1 subintervals and >= 2 grid points");
  double span = hi - lo;
  double a0 = lo + opts.inset * span, a1 = hi - opts.inset * span;
  // K subintervals need K+2 breakpoints; I_i* = [b_i, b_(i+2) - iota]
  const int nb = K + 2;
  std::vector<double> b(nb);
  for (int i = 0; i < nb; ++i) b[i] = a0 + (a1 - a0) * i / double(nb - 1);
  const double iota = 1e-9 * span;

  a.homoclinic_cover.clear();
  a.cover_grid_spacing = 0;
  for (int i = 0; i + 2 < nb; ++i) {
    CoverInterval ci;
    ci.e_lo = b[i];
    ci.e_hi = b[i + 2] - (i + 2 < nb - 1 ? iota : 0.0);
    for (int g = 0; g < opts.grid_per_sub; ++g)
      ci.grid.push_back(ci.e_lo + (ci.e_hi - ci.e_lo) * g / double(opts.grid_per_sub - 1));
    a.cover_grid_spacing =
        std::max(a.cover_grid_spacing, ci.grid[1] - ci.grid[0]);
    for (double e : ci.grid) {
      auto hits = find_homoclinic(U, a, e, opts.hom, coupling);
      // overlap region with the neighbors: the two families must coexist
      bool in_overlap = (i > 0 && e <= b[i + 1]) || (i + 3 < nb && e >= b[i + 1]);
      std::size_t need = in_overlap ? 2 : 1;
      if (hits.size() < need)
        throw NoIntersection("cover grid energy lacks the required distinct witnesses");
      for (std::size_t k = 0; k < std::min(hits.size(), need); ++k)
        ci.witnesses.push_back(hits[k]);
    }
    a.homoclinic_cover.push_back(std::move(ci));
  }
}

struct ChainEdge {
  int i = 0, j = 0;         // indices into the annulus list; -1 marks the
                            // singular annulus side of a generalized edge
  double e_lo = 0, e_hi = 0;  // overlap certified over this range
  std::vector<double> grid;
  std::vector<HomoclinicWitness> forward;   // W^u(i) meets W^s(j)
  std::vector<HomoclinicWitness> backward;  // W^u(j) meets W^s(i)
  bool verified = false;
  std::string note;
};

struct ChainReport {
  bool certified = false;
  std::vector<ChainEdge> edges;
  std::vector<std::string> failures;
};

struct ChainOpts {
  int grid_per_edge = 2;
  double inset = 0.05;  // stay off the overlap endpoints
  HomoclinicOpts hom{};
  OrbitOpts orbit{};
};

namespace detail {

// One direction of one edge at one energy; a and b must already share the
// section. Same-orbit pairs are legitimate: when two branches of a chain
// resolve to one family, its transverse homoclinics are the connection.
inline void edge_witnesses(const TrigPotential& U, const PeriodicOrbit& a,
                           const PeriodicOrbit& b, const ChainOpts& opts, double coupling,
                           std::vector<HomoclinicWitness>& into, std::string& fail_note) {
  try {
    std::vector<HomoclinicWitness> w;
    double same = std::abs(angle_diff(a.anchor[0], b.anchor[0])) +
                  std::abs(angle_diff(a.anchor[1], b.anchor[1])) +
                  std::abs(a.anchor[2] - b.anchor[2]) + std::abs(a.anchor[3] - b.anchor[3]);
    if (same < 1e-8)
      w = find_homoclinic(a, U, opts.hom, coupling);
    else
      w = find_heteroclinic(a, b, U, opts.hom, coupling);
    into.insert(into.end(), w.begin(), w.end());
  } catch (const NoIntersection& ex) {
    fail_note = ex.what();
  } catch (const OnlyTangential& ex) {
    fail_note = ex.what();
  }
}

}  // namespace detail

// Certify a chain: interval ordering with consecutive overlaps, and both-way
// transverse connections on a grid of overlap energies for every consecutive
// pair. With a singular annulus, its +-c_sep sub-annuli are connected to the
// first (lowest) annulus of the list the same way.
inline ChainReport verify_chain(const TrigPotential& U, const std::vector<Annulus>& annuli,
                                const SingularAnnulus* sing = nullptr,
                                const ChainOpts& opts = {}, double coupling = 1.0) {
  if (annuli.empty()) throw std::invalid_argument("verify_chain: no annuli");
  for (std::size_t i = 0; i + 1 < annuli.size(); ++i) {
    if (annuli[i + 1].e_lo < annuli[i].e_lo || annuli[i + 1].e_hi < annuli[i].e_hi)
      throw GapInIntervals("annuli are not ordered by energy interval");
    if (!(annuli[i].e_hi > annuli[i + 1].e_lo))
      throw GapInIntervals("consecutive annulus intervals do not overlap");
  }

  ChainReport rep;
  rep.certified = true;

  auto run_edge = [&](int i, int j, const Annulus& ai, const Annulus& aj, double lo,
                      double hi) {
    ChainEdge edge;
    edge.i = i;
    edge.j = j;
    double span = hi - lo;
    edge.e_lo = lo + opts.inset * span;
    edge.e_hi = hi - opts.inset * span;
    for (int g = 0; g < opts.grid_per_edge; ++g)
      edge.grid.push_back(opts.grid_per_edge == 1
                              ? 0.5 * (edge.e_lo + edge.e_hi)
                              : edge.e_lo + (edge.e_hi - edge.e_lo) * g /
                                                double(opts.grid_per_edge - 1));
    edge.verified = true;
    for (double e : edge.grid) {
      std::string note_f, note_b;
      try {
        PeriodicOrbit oa = annulus_orbit_at(U, ai, e, opts.orbit, coupling);
        // the second orbit re-solved on the first one's section
        OrbitOpts ob_opts = opts.orbit;
        ob_opts.h = oa.h;
        ob_opts.section = &oa.section;
        PeriodicOrbit ob = find_periodic_orbit(U, aj.c, e, aj.orbit_near(e).anchor,
                                               ob_opts, coupling);
        detail::edge_witnesses(U, oa, ob, opts, coupling, edge.forward, note_f);
        detail::edge_witnesses(U, ob, oa, opts, coupling, edge.backward, note_b);
      } catch (const std::runtime_error& ex) {
        note_f = std::string("orbit resolution failed: ") + ex.what();
      }
      if (!note_f.empty() || !note_b.empty()) {
        edge.verified = false;
        edge.note = !note_f.empty() ? note_f : note_b;
        rep.failures.push_back("edge " + std::to_string(i) + "->" + std::to_string(j) +
                               " at e=" + std::to_string(e) + ": " + edge.note);
      }
    }
    if (edge.forward.empty() || edge.backward.empty()) edge.verified = false;
    rep.certified = rep.certified && edge.verified;
    rep.edges.push_back(std::move(edge));
  };

  for (std::size_t i = 0; i + 1 < annuli.size(); ++i) {
    double lo = std::max(annuli[i].e_lo, annuli[i + 1].e_lo);
    double hi = std::min(annuli[i].e_hi, annuli[i + 1].e_hi);
    run_edge(int(i), int(i + 1), annuli[i], annuli[i + 1], lo, hi);
  }

  if (sing != nullptr) {
    // the singular annulus joins through whichever sub-annulus realizes the
    // chain's class; its opposite twin is reached inside the singular annulus
    // through the separatrix pair, not by a same-section heteroclinic
    const Annulus& first = annuli.front();
    const Annulus& sub =
        sing->sub_lt.c == first.c ? sing->sub_lt : sing->sub_gt;
    double lo = std::max(sub.e_lo, first.e_lo);
    double hi = std::min(sub.e_hi, first.e_hi);
    if (!(hi > lo)) {
      rep.certified = false;
      rep.failures.push_back("generalized edge has no energy overlap");
    } else {
      run_edge(-1, 0, sub, first, lo, hi);
    }
  }

  return rep;
}

}  // namespace hdl
