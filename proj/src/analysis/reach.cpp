#include <algorithm>
#include <deque>

#include "compart/analysis.hpp"

namespace compart::analysis {

std::string PlaceKey::to_string() const {
  return function + ":v" + std::to_string(local) + path;
}

std::string_view rule_name(Rule r) {
  switch (r) {
    case Rule::SeedArgument: return "seed-argument";
    case Rule::SeedReturn: return "seed-return";
    case Rule::Assign: return "assign";
    case Rule::AddrOf: return "addr-of";
    case Rule::DerefLoad: return "deref-load";
    case Rule::DerefStore: return "deref-store";
    case Rule::AddrOfDeref: return "addr-of-deref";
    case Rule::InteriorBorrow: return "interior-borrow";
    case Rule::CallParam: return "call-param";
    case Rule::CallReturn: return "call-return";
  }
  return "?";
}

const SharedDomain* SharedDomainPlan::find(std::uint32_t id) const {
  for (const auto& d : domains)
    if (d.id == id) return &d;
  return nullptr;
}

namespace {

using Tokens = std::vector<std::string>;

const ir::TypeExpr& strip_refs(const ir::TypeExpr& t) {
  const ir::TypeExpr* cur = &t;
  while (cur->is_ref()) cur = &cur->inner();
  return *cur;
}

// Builds canonical keys. Derefs are dropped, indices become `[*]`, and the
// chain is cut where it re-enters an aggregate it already passed through, so
// recursive structures fold onto a finite set of nodes.
class Keys {
 public:
  explicit Keys(const ir::Program& p) : p_(p) {}

  PlaceKey canon(const ir::FunctionDef& f, ir::LocalIndex local, const Tokens& tokens) const {
    PlaceKey k{f.path, local, {}};
    if (local >= f.locals.size()) return k;
    const ir::TypeExpr* t = &strip_refs(f.locals[local]);
    std::set<std::string> seen;
    if (t->kind() == ir::TypeExpr::Kind::Aggregate) seen.insert(t->name());
    for (const auto& tok : tokens) {
      const ir::TypeExpr* next = step(*t, tok);
      if (!next) break;
      next = &strip_refs(*next);
      if (next->kind() == ir::TypeExpr::Kind::Aggregate && !seen.insert(next->name()).second) break;
      k.path += tok;
      t = next;
    }
    return k;
  }

  static Tokens tokens_of(const ir::Place& place) {
    Tokens out;
    for (const auto& pr : place.projections) {
      if (pr.kind == ir::Projection::Kind::Field) out.push_back("." + pr.field);
      else if (pr.kind == ir::Projection::Kind::Index) out.push_back("[*]");
    }
    return out;
  }

  /// Every projection suffix of a value of type `t`, including the empty one.
  std::vector<Tokens> suffixes(const ir::TypeExpr& t) const {
    std::vector<Tokens> out;
    Tokens cur;
    std::set<std::string> seen;
    walk(strip_refs(t), cur, seen, out);
    return out;
  }

 private:
  const ir::TypeExpr* step(const ir::TypeExpr& t, const std::string& tok) const {
    if (tok == "[*]") return t.kind() == ir::TypeExpr::Kind::Vec ? &t.inner() : nullptr;
    if (t.kind() != ir::TypeExpr::Kind::Aggregate) return nullptr;
    const auto* agg = p_.find_aggregate(t.name());
    return agg ? agg->field_type(std::string_view(tok).substr(1)) : nullptr;
  }

  void walk(const ir::TypeExpr& t, Tokens& cur, std::set<std::string>& seen,
            std::vector<Tokens>& out) const {
    out.push_back(cur);
    if (t.kind() == ir::TypeExpr::Kind::Vec) {
      descend(strip_refs(t.inner()), "[*]", cur, seen, out);
    } else if (t.kind() == ir::TypeExpr::Kind::Aggregate) {
      const auto* agg = p_.find_aggregate(t.name());
      if (!agg || !seen.insert(t.name()).second) return;
      for (const auto& [name, ft] : agg->fields) descend(strip_refs(ft), "." + name, cur, seen, out);
      seen.erase(t.name());
    }
  }

  void descend(const ir::TypeExpr& t, const std::string& tok, Tokens& cur,
               std::set<std::string>& seen, std::vector<Tokens>& out) const {
    if (t.kind() == ir::TypeExpr::Kind::Aggregate && seen.count(t.name())) return;
    cur.push_back(tok);
    walk(t, cur, seen, out);
    cur.pop_back();
  }

  const ir::Program& p_;
};

Tokens concat(Tokens a, const Tokens& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

class RelationBuilder {
 public:
  RelationBuilder(const ir::Program& p, ReachSet& out) : p_(p), keys_(p), out_(out) {}

  void expand(Relation& r, const ir::FunctionDef& lf, ir::LocalIndex ll, const Tokens& lt,
              const ir::FunctionDef& rf, ir::LocalIndex rl, const Tokens& rt,
              const ir::TypeExpr& type) {
    for (const auto& eta : keys_.suffixes(type))
      r.pairs.emplace_back(keys_.canon(lf, ll, concat(lt, eta)),
                           keys_.canon(rf, rl, concat(rt, eta)));
  }

  void statement(const ir::FunctionDef& f, std::size_t index) {
    const auto& s = f.statement(index);
    ir::StmtRef at{f.path, index};
    using K = ir::Statement::Kind;
    if (s.kind == K::Assign && s.dst) {
      const auto& rv = s.rvalue;
      const ir::Place* src = nullptr;
      if (rv.kind == ir::Rvalue::Kind::Use && rv.lhs.kind == ir::Operand::Kind::Copy)
        src = &rv.lhs.place;
      else if (rv.kind == ir::Rvalue::Kind::AddrOf)
        src = &rv.place;
      if (!src) return;
      auto type = ir::type_of_place(p_, f, *src);
      if (!type) return;
      Relation r;
      r.stmt = at;
      if (rv.kind == ir::Rvalue::Kind::AddrOf) {
        r.rule = src->has_deref() ? Rule::AddrOfDeref : Rule::AddrOf;
      } else {
        r.rule = src->has_deref() ? Rule::DerefLoad
                 : s.dst->has_deref() ? Rule::DerefStore
                                      : Rule::Assign;
      }
      expand(r, f, s.dst->local, Keys::tokens_of(*s.dst), f, src->local, Keys::tokens_of(*src),
             *type);
      out_.statements.push_back(std::move(r));
      if (rv.kind == ir::Rvalue::Kind::AddrOf) interior_borrow(f, at, *s.dst, *src);
    } else if (s.kind == K::Call) {
      const auto* callee = p_.find_function(s.callee);
      if (!callee) return;
      auto site = static_cast<std::uint32_t>(out_.call_sites.size());
      out_.call_sites.push_back(at);
      for (std::size_t i = 0; i < s.args.size() && i < callee->param_count; ++i) {
        Relation r;
        r.rule = Rule::CallParam;
        r.stmt = at;
        r.call_site = site;
        r.lhs_in_callee = true;
        auto param = static_cast<ir::LocalIndex>(i + 1);
        expand(r, *callee, param, {}, f, s.args[i].local, Keys::tokens_of(s.args[i]),
               callee->locals[param]);
        out_.statements.push_back(std::move(r));
      }
      if (s.dst) {
        Relation r;
        r.rule = Rule::CallReturn;
        r.stmt = at;
        r.call_site = site;
        r.lhs_in_callee = false;
        expand(r, f, s.dst->local, Keys::tokens_of(*s.dst), *callee, 0, {},
               callee->return_type());
        out_.statements.push_back(std::move(r));
      }
    }
  }

  const Keys& keys() const { return keys_; }

 private:
  // `p = &c[i]...` or `p = &(*q)...` yields a pointer into memory owned by
  // the vec buffer of c (resp. whatever q points into). The plain rules only
  // relate p to the element, so the owning handle is linked explicitly.
  void interior_borrow(const ir::FunctionDef& f, const ir::StmtRef& at, const ir::Place& dst,
                       const ir::Place& src) {
    std::optional<std::size_t> cut;
    for (std::size_t i = 0; i < src.projections.size(); ++i)
      if (src.projections[i].kind != ir::Projection::Kind::Field) cut = i;
    if (!cut) return;
    ir::Place owner{src.local, {src.projections.begin(),
                                src.projections.begin() + static_cast<std::ptrdiff_t>(*cut)}};
    Relation r;
    r.rule = Rule::InteriorBorrow;
    r.stmt = at;
    r.pairs.emplace_back(keys_.canon(f, dst.local, Keys::tokens_of(dst)),
                         keys_.canon(f, owner.local, Keys::tokens_of(owner)));
    out_.statements.push_back(std::move(r));
  }

  const ir::Program& p_;
  Keys keys_;
  ReachSet& out_;
};

}  // namespace

PlaceKey ReachSet::key_of(const ir::Program& p, const ir::FunctionDef& f, const ir::Place& place) {
  return Keys(p).canon(f, place.local, Keys::tokens_of(place));
}

std::set<PlaceKey> place_universe(const ir::Program& p) {
  Keys keys(p);
  std::set<PlaceKey> out;
  for (const auto* f : p.functions())
    for (ir::LocalIndex l = 0; l < f->locals.size(); ++l)
      for (const auto& eta : keys.suffixes(f->locals[l])) out.insert(keys.canon(*f, l, eta));
  return out;
}

ReachSet compute_reach(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                       const std::vector<callgraph::BoundarySite>& sites) {
  (void)units;
  ReachSet r;
  RelationBuilder builder(p, r);
  for (const auto* f : p.functions())
    for (std::size_t i = 0; i < f->statement_count(); ++i) builder.statement(*f, i);

  auto add = [&](const PlaceKey& k, std::uint32_t label, const Provenance& why) {
    auto [it, fresh] = r.members.try_emplace(k);
    if (fresh) r.provenance[k] = why;
    return it->second.insert(label).second;
  };

  // Seeds: boundary arguments with every field below them, and the callee's
  // return slot.
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const auto& site = sites[k];
    const auto* caller = p.find_function(site.call.caller);
    const auto* callee = p.find_function(site.call.callee);
    if (!caller || !callee) continue;
    const auto& call = caller->statement(site.call.stmt);
    ir::StmtRef at{caller->path, site.call.stmt};
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      auto type = ir::type_of_place(p, *caller, call.args[i]);
      if (!type) continue;
      auto label = static_cast<std::uint32_t>(r.labels.size());
      r.labels.push_back(SeedLabel{static_cast<std::uint32_t>(k), static_cast<int>(i)});
      auto base = Keys::tokens_of(call.args[i]);
      for (const auto& eta : builder.keys().suffixes(*type)) {
        auto key = builder.keys().canon(*caller, call.args[i].local, concat(base, eta));
        add(key, label, Provenance{Rule::SeedArgument, at, std::nullopt});
        r.seeds.insert(key);
        r.seed_labels[key].insert(label);
      }
    }
    auto label = static_cast<std::uint32_t>(r.labels.size());
    r.labels.push_back(SeedLabel{static_cast<std::uint32_t>(k), SeedLabel::kReturnSlot});
    for (const auto& eta : builder.keys().suffixes(callee->return_type())) {
      auto key = builder.keys().canon(*callee, 0, eta);
      add(key, label, Provenance{Rule::SeedReturn, at, std::nullopt});
      r.seeds.insert(key);
      r.seed_labels[key].insert(label);
    }
  }

  r.universe_size = place_universe(p).size();

  // Chaotic iteration over the relation set, both directions per pair.
  bool changed = true;
  while (changed) {
    changed = false;
    ++r.iterations;
    for (const auto& rel : r.statements) {
      for (const auto& [a, b] : rel.pairs) {
        for (int dir = 0; dir < 2; ++dir) {
          const PlaceKey& from = dir ? a : b;
          const PlaceKey& to = dir ? b : a;
          auto src = r.members.find(from);
          if (src == r.members.end()) continue;
          std::vector<std::uint32_t> labels(src->second.begin(), src->second.end());
          for (auto l : labels)
            if (add(to, l, Provenance{rel.rule, rel.stmt, from})) changed = true;
        }
      }
    }
  }
  return r;
}

namespace {

struct FilterEdge {
  std::size_t to;
  enum class Op { None, Push, Pop } op = Op::None;
  std::uint32_t site = 0;
};

}  // namespace

ReachSet filter_context(const ReachSet& reach, std::size_t state_budget) {
  ReachSet out = reach;
  out.context_filtered = true;

  std::map<PlaceKey, std::size_t> ids;
  std::vector<PlaceKey> names;
  auto id = [&](const PlaceKey& k) {
    auto [it, fresh] = ids.try_emplace(k, names.size());
    if (fresh) names.push_back(k);
    return it->second;
  };
  std::vector<std::vector<FilterEdge>> adj;
  for (const auto& rel : reach.statements) {
    for (const auto& [a, b] : rel.pairs) {
      std::size_t ia = id(a), ib = id(b);
      if (adj.size() < names.size()) adj.resize(names.size());
      FilterEdge ab{ib}, ba{ia};
      if (rel.call_site) {
        // Moving from caller to callee opens the call site; the way back
        // must close the same one.
        bool a_callee = rel.lhs_in_callee;
        ab.op = a_callee ? FilterEdge::Op::Pop : FilterEdge::Op::Push;
        ba.op = a_callee ? FilterEdge::Op::Push : FilterEdge::Op::Pop;
        ab.site = ba.site = *rel.call_site;
      }
      adj[ia].push_back(ab);
      adj[ib].push_back(ba);
    }
  }
  for (const auto& [k, _] : reach.seed_labels) id(k);
  adj.resize(names.size());

  struct State {
    std::size_t node;
    bool wild;
    std::vector<std::uint32_t> stack;
    auto operator<=>(const State&) const = default;
  };

  std::map<PlaceKey, std::set<std::uint32_t>> members;
  std::size_t total_states = 0;
  for (std::uint32_t label = 0; label < reach.labels.size(); ++label) {
    std::set<State> seen;
    std::deque<State> work;
    for (const auto& [k, labels] : reach.seed_labels)
      if (labels.count(label)) {
        State s{ids.at(k), false, {}};
        if (seen.insert(s).second) work.push_back(s);
      }
    while (!work.empty()) {
      State s = std::move(work.front());
      work.pop_front();
      members[names[s.node]].insert(label);
      for (const auto& e : adj[s.node]) {
        State n{e.to, s.wild, s.stack};
        if (!n.wild && e.op == FilterEdge::Op::Push) {
          if (std::find(n.stack.begin(), n.stack.end(), e.site) != n.stack.end()) {
            n.wild = true;  // recursion: stop matching on this path
            n.stack.clear();
          } else {
            n.stack.push_back(e.site);
          }
        } else if (!n.wild && e.op == FilterEdge::Op::Pop) {
          if (!n.stack.empty()) {
            if (n.stack.back() != e.site) continue;
            n.stack.pop_back();
          }
        }
        if (seen.insert(n).second) {
          if (++total_states > state_budget) {
            ReachSet fallback = reach;
            fallback.context_filtered = true;
            fallback.filter_degraded = true;
            return fallback;
          }
          work.push_back(std::move(n));
        }
      }
    }
  }

  // Only keep what the unfiltered closure derived; seeds always survive.
  out.members.clear();
  for (auto& [k, labels] : members) {
    auto orig = reach.members.find(k);
    if (orig == reach.members.end()) continue;
    std::set<std::uint32_t> kept;
    std::set_intersection(labels.begin(), labels.end(), orig->second.begin(), orig->second.end(),
                          std::inserter(kept, kept.begin()));
    if (!kept.empty()) out.members[k] = std::move(kept);
  }
  for (const auto& [k, labels] : reach.seed_labels) out.members[k].insert(labels.begin(), labels.end());
  for (auto it = out.provenance.begin(); it != out.provenance.end();)
    it = out.members.count(it->first) ? std::next(it) : out.provenance.erase(it);
  return out;
}

namespace {

std::vector<AllocSite> collect_allocs(const ReachSet& reach, const ir::Program& p,
                                      const std::vector<std::string>* containers) {
  std::vector<AllocSite> out;
  for (const auto* f : p.functions()) {
    for (std::size_t i = 0; i < f->statement_count(); ++i) {
      const auto& s = f->statement(i);
      if (s.kind != ir::Statement::Kind::Alloc || !s.dst) continue;
      if (containers &&
          std::find(containers->begin(), containers->end(), s.container) == containers->end())
        continue;
      auto key = ReachSet::key_of(p, *f, *s.dst);
      auto m = reach.members.find(key);
      if (m == reach.members.end()) continue;
      AllocSite site{ir::StmtRef{f->path, i}, s.container, key, m->second, {}, {}};
      for (auto l : m->second) site.boundary_sites.insert(reach.labels.at(l).site);
      out.push_back(std::move(site));
    }
  }
  return out;
}

}  // namespace

std::vector<AllocSite> find_alloc_sites(const ReachSet& reach, const ir::Program& p,
                                        const std::vector<std::string>& containers) {
  return collect_allocs(reach, p, &containers);
}

std::vector<AllocSite> alloc_origins(const ReachSet& reach, const ir::Program& p) {
  return collect_allocs(reach, p, nullptr);
}

SharedDomainPlan plan_shared_domains(const std::vector<AllocSite>& sites,
                                     const std::vector<callgraph::BoundarySite>& boundary,
                                     const std::map<std::string, std::set<UnitId>>* contexts) {
  SharedDomainPlan plan;
  for (const auto& site : sites) {
    std::set<UnitId> participants = site.contexts;
    for (auto b : site.boundary_sites) {
      participants.insert(boundary.at(b).caller_unit);
      participants.insert(boundary.at(b).callee_unit);
    }
    if (contexts) {
      auto it = contexts->find(site.stmt.function);
      if (it != contexts->end()) participants.insert(it->second.begin(), it->second.end());
    }
    auto found = std::find_if(plan.domains.begin(), plan.domains.end(),
                              [&](const SharedDomain& d) { return d.participants == participants; });
    std::uint32_t id;
    if (found == plan.domains.end()) {
      id = SharedDomainPlan::kBaseId + static_cast<std::uint32_t>(plan.domains.size());
      plan.domains.push_back(SharedDomain{id, participants});
    } else {
      id = found->id;
    }
    plan.site_domain[site.stmt] = id;
  }
  return plan;
}

}  // namespace compart::analysis
