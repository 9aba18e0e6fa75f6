#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "avi/trace.hpp"

namespace avi {

// ---------------------------------------------------------------------------
// ParamStore: one unconstrained parameter vector per ERP address.
//
// This is the machinery behind the mean-field transform of a target
// program: run_guided consults the store instead of the parameters the
// program computed, so parameter dependence between sites is severed while
// control-flow dependence stays intact. Addresses are registered at first
// encounter, initialized from the target's natural parameters, and keep a
// stable registration order for flattening.
// ---------------------------------------------------------------------------
class ParamStore {
 public:
  struct Slot {
    ErpFamily family;
    ParamVector params;
  };

  // Existing parameters are returned unchanged; an unseen address is
  // registered with init_from_target. Reusing an address with a different
  // family is a structural error.
  const ParamVector& lookup_or_init(const Address& addr, const ErpFamily& family,
                                    const Vec& naturals) {
    auto it = table_.find(addr);
    if (it != table_.end()) {
      if (it->second.family != family)
        throw StructureError("address " + addr.str() + " reused with family " +
                             family.name() + ", registered as " +
                             it->second.family.name());
      return it->second.params;
    }
    auto [pos, _] = table_.emplace(addr, Slot{family, init_from_target(family, naturals)});
    order_.push_back(addr);
    offsets_valid_ = false;
    return pos->second.params;
  }

  bool contains(const Address& addr) const { return table_.count(addr) > 0; }
  size_t site_count() const { return order_.size(); }
  const std::vector<Address>& registration_order() const { return order_; }

  const Slot& at(const Address& addr) const {
    auto it = table_.find(addr);
    if (it == table_.end())
      throw StructureError("unknown address " + addr.str());
    return it->second;
  }

  void set_params(const Address& addr, const ParamVector& p) {
    auto it = table_.find(addr);
    if (it == table_.end()) throw StructureError("unknown address " + addr.str());
    if (p.size() != it->second.family.arity())
      throw ParameterError("set_params: wrong arity for " + addr.str());
    if (!all_finite(p)) throw ParameterError("set_params: non-finite parameters");
    it->second.params = p;
  }

  // Total flattened dimension, segments in registration order.
  int dim() const {
    int d = 0;
    for (const auto& a : order_) d += table_.at(a).family.arity();
    return d;
  }

  int offset_of(const Address& addr) const {
    refresh_offsets();
    auto it = offsets_.find(addr);
    if (it == offsets_.end())
      throw StructureError("unknown address " + addr.str());
    return it->second;
  }

  Vec flatten() const {
    Vec v(dim());
    int off = 0;
    for (const auto& a : order_) {
      const auto& slot = table_.at(a);
      v.segment(off, slot.params.size()) = slot.params;
      off += int(slot.params.size());
    }
    return v;
  }

  void unflatten(const Vec& v) {
    if (v.size() != dim())
      throw ParameterError("unflatten: length " + std::to_string(v.size()) +
                           " != store dimension " + std::to_string(dim()));
    if (!all_finite(v)) throw ParameterError("unflatten: non-finite parameters");
    int off = 0;
    for (const auto& a : order_) {
      auto& slot = table_.at(a);
      slot.params = v.segment(off, slot.params.size());
      off += int(slot.params.size());
    }
  }

  // theta += stepsize * direction, segment-wise in registration order.
  void apply_step(const Vec& direction, double stepsize) {
    if (direction.size() != dim())
      throw ParameterError("apply_step: direction length " +
                           std::to_string(direction.size()) + " != store dimension " +
                           std::to_string(dim()));
    int off = 0;
    for (const auto& a : order_) {
      auto& slot = table_.at(a);
      slot.params += stepsize * direction.segment(off, slot.params.size());
      if (!all_finite(slot.params))
        throw NumericalError("apply_step: non-finite parameters at " + a.str());
      off += int(slot.params.size());
    }
  }

  // -------------------------------------------------------------------------
  // Snapshot format: one line per address in registration order,
  //   site_id,occurrence,family,param0,param1,...
  // Site ids must not contain commas. Lines starting with '#' are skipped.
  // -------------------------------------------------------------------------
  void save(std::ostream& os) const {
    os << "# avi store snapshot v1\n";
    char buf[64];
    for (const auto& a : order_) {
      const auto& slot = table_.at(a);
      os << a.site << ',' << a.occurrence << ',' << slot.family.name();
      for (int i = 0; i < slot.params.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", slot.params[i]);
        os << ',' << buf;
      }
      os << '\n';
    }
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write store snapshot: " + path);
    save(os);
  }

  static ParamStore load(std::istream& is) {
    ParamStore store;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> tok;
      std::stringstream ss(line);
      std::string item;
      while (std::getline(ss, item, ',')) tok.push_back(item);
      if (tok.size() < 4)
        throw IoError("store snapshot line " + std::to_string(lineno) + ": too few fields");
      try {
        Address addr{tok[0], std::stoi(tok[1])};
        ErpFamily family = parse_family(tok[2]);
        ParamVector p(tok.size() - 3);
        for (size_t i = 3; i < tok.size(); ++i) p[int(i - 3)] = std::stod(tok[i]);
        if (p.size() != family.arity())
          throw IoError("store snapshot line " + std::to_string(lineno) +
                        ": arity mismatch for " + family.name());
        if (store.table_.count(addr))
          throw IoError("store snapshot line " + std::to_string(lineno) +
                        ": duplicate address " + addr.str());
        store.table_.emplace(addr, Slot{family, std::move(p)});
        store.order_.push_back(addr);
      } catch (const std::invalid_argument&) {
        throw IoError("store snapshot line " + std::to_string(lineno) + ": parse error");
      }
    }
    return store;
  }

  static ParamStore load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read store snapshot: " + path);
    return load(is);
  }

  static ErpFamily parse_family(const std::string& s) {
    auto split = [&](const std::string& str) {
      std::vector<std::string> parts;
      std::stringstream ss(str);
      std::string item;
      while (std::getline(ss, item, ':')) parts.push_back(item);
      return parts;
    };
    const auto parts = split(s);
    const std::string& kind = parts[0];
    if (kind == "normal") return ErpFamily::normal();
    if (kind == "bernoulli") return ErpFamily::bernoulli();
    if (kind == "beta") return ErpFamily::beta();
    if (kind == "gamma") return ErpFamily::gamma();
    if (kind == "categorical" && parts.size() == 2)
      return ErpFamily::categorical(std::stoi(parts[1]));
    if (kind == "dirichlet" && parts.size() == 2)
      return ErpFamily::dirichlet(std::stoi(parts[1]));
    if (kind == "uniform" && parts.size() == 3)
      return ErpFamily::uniform(std::stod(parts[1]), std::stod(parts[2]));
    throw IoError("unknown ERP family: " + s);
  }

 private:
  void refresh_offsets() const {
    if (offsets_valid_) return;
    offsets_.clear();
    int off = 0;
    for (const auto& a : order_) {
      offsets_[a] = off;
      off += table_.at(a).family.arity();
    }
    offsets_valid_ = true;
  }

  std::unordered_map<Address, Slot, AddressHash> table_;
  std::vector<Address> order_;
  mutable std::unordered_map<Address, int, AddressHash> offsets_;
  mutable bool offsets_valid_ = false;
};

// Monte-Carlo estimate of the lower bound: mean of gain(trace, 0) over n
// guided runs. stderr is 0 when n = 1; single_sample flags that case.
struct ElboEstimate {
  double mean = 0;
  double stderr = 0;
  int n_samples = 0;
  bool single_sample = false;
};

inline ElboEstimate elbo_estimate(const Program& program, ParamStore& store, int n,
                                  Rng& rng) {
  if (n < 1) throw ParameterError("elbo_estimate: n must be >= 1");
  double sum = 0, sumsq = 0;
  for (int j = 0; j < n; ++j) {
    const double g = gain(run_guided(program, store, rng), 0.0);
    sum += g;
    sumsq += g * g;
  }
  ElboEstimate est;
  est.n_samples = n;
  est.mean = sum / n;
  est.single_sample = (n == 1);
  if (n > 1) {
    const double var = std::max(0.0, (sumsq - n * est.mean * est.mean) / (n - 1));
    est.stderr = std::sqrt(var / n);
  }
  return est;
}

}  // namespace avi
