#include "compart/instrument.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace compart::instrument {

using json = nlohmann::ordered_json;

std::string_view mode_name(Mode m) { return m == Mode::Copy ? "copy" : "share"; }

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "copy") return Mode::Copy;
  if (s == "share") return Mode::Share;
  return std::nullopt;
}

std::string_view action_name(CopyNode::Action a) {
  switch (a) {
    case CopyNode::Action::Bitwise: return "bitwise";
    case CopyNode::Action::Aggregate: return "aggregate";
    case CopyNode::Action::CopyReferent: return "copy-referent";
    case CopyNode::Action::PassShared: return "pass-shared";
  }
  return "?";
}

std::string CopyNode::to_string() const {
  std::string s(action_name(action));
  if (recursive) return s + "(" + type.to_string() + ", recursive)";
  if (action == Action::Aggregate) {
    s += "{";
    for (std::size_t i = 0; i < fields.size(); ++i)
      s += (i ? ", " : "") + fields[i].first + ": " + fields[i].second.to_string();
    return s + "}";
  }
  if (action == Action::CopyReferent)
    return s + "(" + type.to_string() + " -> " + referent.front().to_string() + ")";
  if (action == Action::PassShared) return s + "(" + type.to_string() + ")";
  return s;
}

namespace {

bool contains_ref(const ir::Program& p, const ir::TypeExpr& t, std::set<std::string>& seen) {
  using K = ir::TypeExpr::Kind;
  switch (t.kind()) {
    case K::Ref:
    case K::RefMut:
    case K::RawPtr: return true;
    case K::Vec: return contains_ref(p, t.inner(), seen);
    case K::Aggregate: {
      if (!seen.insert(t.name()).second) return false;
      const auto* agg = p.find_aggregate(t.name());
      if (!agg) return false;
      for (const auto& [_, ft] : agg->fields)
        if (contains_ref(p, ft, seen)) return true;
      return false;
    }
    default: return false;
  }
}

class Planner {
 public:
  Planner(const ir::Program& p, Mode mode, bool covered, std::vector<std::string>* warnings)
      : p_(p), mode_(mode), covered_(covered), warnings_(warnings) {}

  CopyNode plan(const ir::TypeExpr& t) {
    using K = ir::TypeExpr::Kind;
    CopyNode n;
    n.type = t;
    n.covered = covered_;
    switch (t.kind()) {
      case K::Bool:
      case K::I32: return n;
      case K::RawPtr:
        if (mode_ == Mode::Copy)
          throw InstrumentError("raw pointer values cannot be copied across a boundary");
        return n;
      case K::Ref:
      case K::RefMut:
        // Stack data is always copied, in both modes.
        n.action = CopyNode::Action::CopyReferent;
        n.referent.push_back(plan(t.inner()));
        return n;
      case K::Vec: {
        std::set<std::string> seen;
        bool has_refs = contains_ref(p_, t.inner(), seen);
        if (mode_ == Mode::Share && covered_ && !has_refs) {
          n.action = CopyNode::Action::PassShared;
          return n;
        }
        if (mode_ == Mode::Share && warnings_) {
          warnings_->push_back(has_refs ? "heap data of type " + t.to_string() +
                                              " holds references; falling back to copy"
                                        : "alloc sites of " + t.to_string() +
                                              " not covered by the shared-domain plan; "
                                              "falling back to copy");
        }
        n.action = CopyNode::Action::CopyReferent;
        n.referent.push_back(plan(t.inner()));
        return n;
      }
      case K::Aggregate: {
        n.action = CopyNode::Action::Aggregate;
        if (std::find(stack_.begin(), stack_.end(), t.name()) != stack_.end()) {
          n.recursive = true;
          return n;
        }
        const auto* agg = p_.find_aggregate(t.name());
        if (!agg) throw InstrumentError("unknown aggregate " + t.name());
        stack_.push_back(t.name());
        for (const auto& [name, ft] : agg->fields) n.fields.emplace_back(name, plan(ft));
        stack_.pop_back();
        return n;
      }
    }
    return n;
  }

 private:
  const ir::Program& p_;
  Mode mode_;
  bool covered_;
  std::vector<std::string>* warnings_;
  std::vector<std::string> stack_;
};

std::string mangle(std::string_view path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.substr(i, 2) == "::") {
      out += '_';
      ++i;
    } else {
      out += path[i];
    }
  }
  return out;
}

}  // namespace

CopyNode copy_plan_for_type(const ir::Program& p, const ir::TypeExpr& t, Mode mode, bool covered,
                            std::vector<std::string>* warnings) {
  return Planner(p, mode, covered, warnings).plan(t);
}

CopyNode copy_plan_for_type(const ir::Program& p, const ir::TypeExpr& t, Mode mode,
                            const analysis::SharedDomainPlan& plan,
                            const std::vector<analysis::AllocSite>& origins,
                            std::vector<std::string>* warnings) {
  bool covered = std::all_of(origins.begin(), origins.end(), [&](const analysis::AllocSite& s) {
    return plan.site_domain.count(s.stmt) != 0;
  });
  return copy_plan_for_type(p, t, mode, covered, warnings);
}

const WrapperInfo* InstrumentedProgram::find_wrapper(std::string_view name) const {
  for (const auto& w : wrappers)
    if (w.name == name) return &w;
  return nullptr;
}

const WrapperInfo* InstrumentedProgram::find_variant(std::string_view target,
                                                     UnitId caller_unit) const {
  for (const auto& w : wrappers)
    if (w.target == target && w.caller_unit == caller_unit) return &w;
  return nullptr;
}

const std::vector<std::string>& wrapper_ops() {
  static const std::vector<std::string> ops{"resolve-domain", "enter",   "copy-args",
                                            "call",           "copy-return", "restore",
                                            "free-copies",    "exit",    "destroy-if-transient"};
  return ops;
}

InstrumentedProgram instrument(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                               const std::vector<callgraph::BoundarySite>& boundary,
                               const analysis::ReachSet& reach,
                               const analysis::SharedDomainPlan& plan, Mode mode,
                               const std::vector<std::string>& containers) {
  InstrumentedProgram ip;
  ip.program = p;
  ip.mode = mode;
  ip.units = units;
  ip.containers = containers;
  if (mode == Mode::Share) ip.plan = plan;
  if (boundary.empty()) return ip;

  auto origins = analysis::alloc_origins(reach, p);
  auto origins_for = [&](std::uint32_t site, int slot) {
    std::vector<analysis::AllocSite> out;
    for (const auto& o : origins)
      for (auto l : o.labels)
        if (reach.labels[l].site == site && reach.labels[l].slot == slot) {
          out.push_back(o);
          break;
        }
    return out;
  };

  // Group boundary sites by (target, caller unit); one wrapper per group.
  struct Group {
    std::string target;
    UnitId caller_unit;
    UnitId callee_unit;
    std::vector<std::uint32_t> sites;
  };
  std::vector<Group> groups;
  for (std::uint32_t k = 0; k < boundary.size(); ++k) {
    const auto& b = boundary[k];
    auto g = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.target == b.call.callee && g.caller_unit == b.caller_unit;
    });
    if (g == groups.end()) {
      groups.push_back(Group{b.call.callee, b.caller_unit, b.callee_unit, {}});
      g = std::prev(groups.end());
    }
    g->sites.push_back(k);
  }

  ir::Crate wrappers{std::string(ir::kWrapperCrate), {}, {}};
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const auto* target = p.find_function(g.target);
    WrapperInfo w;
    std::string rel = "w" + std::to_string(gi) + "_" + mangle(g.target);
    w.name = std::string(ir::kWrapperCrate) + "::" + rel;
    w.target = g.target;
    w.caller_unit = g.caller_unit;
    w.callee_unit = g.callee_unit;
    w.transient = units.at(g.callee_unit - 1).decl.transient;
    w.ops = wrapper_ops();

    auto plan_slot = [&](const ir::TypeExpr& t, int slot, const std::string& what) {
      std::vector<analysis::AllocSite> from;
      for (auto k : g.sites) {
        auto o = origins_for(k, slot);
        from.insert(from.end(), o.begin(), o.end());
      }
      try {
        return copy_plan_for_type(p, t, mode, plan, from, &ip.warnings);
      } catch (const InstrumentError& e) {
        throw InstrumentError(std::string("copy mode cannot transfer ") + what + " of " +
                              g.target + " (" + t.to_string() + "): " + e.what());
      }
    };
    for (std::uint32_t i = 0; i < target->param_count; ++i)
      w.args.push_back(plan_slot(target->locals[i + 1], static_cast<int>(i),
                                 "parameter v" + std::to_string(i + 1)));
    w.ret = plan_slot(target->return_type(), analysis::SeedLabel::kReturnSlot, "the return value");

    ir::FunctionDef fn;
    fn.path = w.name;
    fn.crate = std::string(ir::kWrapperCrate);
    fn.visibility = ir::Visibility::Public;
    fn.param_count = target->param_count;
    fn.locals.assign(target->locals.begin(), target->locals.begin() + 1 + target->param_count);
    ir::Statement call;
    call.kind = ir::Statement::Kind::Call;
    call.dst = ir::Place{0, {}};
    call.callee = g.target;
    for (ir::LocalIndex i = 1; i <= target->param_count; ++i) call.args.push_back(ir::Place{i, {}});
    ir::Statement ret;
    ret.kind = ir::Statement::Kind::Return;
    fn.blocks.push_back(ir::Block{"bb0", {call, ret}});
    wrappers.functions.push_back(std::move(fn));
    ip.wrappers.push_back(std::move(w));
  }

  // Redirect call statements. A statement reached from several domains names
  // the wrapper of its first context; the interpreter picks the variant that
  // matches the domain actually executing.
  std::set<std::pair<std::string, std::size_t>> redirected;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (auto k : groups[gi].sites) {
      const auto& b = boundary[k];
      if (!redirected.insert({b.call.caller, b.call.stmt}).second) continue;
      ip.program.find_function(b.call.caller)->statement(b.call.stmt).callee =
          ip.wrappers[gi].name;
    }

  if (mode == Mode::Share)
    for (const auto& [stmt, id] : plan.site_domain)
      ip.program.find_function(stmt.function)->statement(stmt.index).shared_domain = id;

  ip.program.crates.push_back(std::move(wrappers));
  std::sort(ip.warnings.begin(), ip.warnings.end());
  ip.warnings.erase(std::unique(ip.warnings.begin(), ip.warnings.end()), ip.warnings.end());
  return ip;
}

// ---------------------------------------------------------------------------
// Sidecar

namespace {

json node_json(const CopyNode& n) {
  json j;
  j["action"] = action_name(n.action);
  j["type"] = n.type.to_string();
  if (n.recursive) j["recursive"] = true;
  if (!n.fields.empty()) {
    json fs = json::array();
    for (const auto& [name, f] : n.fields) fs.push_back(json{{"field", name}, {"plan", node_json(f)}});
    j["fields"] = fs;
  }
  if (!n.referent.empty()) j["referent"] = node_json(n.referent.front());
  return j;
}

json units_json(const std::vector<spec::SandboxUnit>& units) {
  json out = json::array();
  for (const auto& u : units) {
    json ju;
    ju["id"] = u.id;
    ju["kind"] = spec::unit_kind_name(u.decl.kind);
    ju["path"] = u.decl.path;
    ju["transient"] = u.decl.transient;
    ju["syscalls"] = u.decl.syscalls;
    ju["entries"] = u.entry_functions;
    ju["members"] = u.declared_members;
    ju["helpers"] = u.cloned_helpers;
    out.push_back(ju);
  }
  return out;
}

}  // namespace

std::string write_sidecar(const InstrumentedProgram& ip) {
  json j;
  j["schema"] = kSidecarSchema;
  j["mode"] = mode_name(ip.mode);
  j["containers"] = ip.containers;
  j["units"] = units_json(ip.units);
  json shared = json::array();
  for (const auto& d : ip.plan.domains) shared.push_back(json{{"id", d.id}, {"participants", d.participants}});
  j["shared_domains"] = shared;
  json sites = json::array();
  for (const auto& [stmt, id] : ip.plan.site_domain)
    sites.push_back(json{{"function", stmt.function}, {"index", stmt.index}, {"domain", id}});
  j["alloc_sites"] = sites;
  json ws = json::array();
  for (const auto& w : ip.wrappers) {
    json jw;
    jw["name"] = w.name;
    jw["target"] = w.target;
    jw["caller_unit"] = w.caller_unit;
    jw["callee_unit"] = w.callee_unit;
    jw["transient"] = w.transient;
    json args = json::array();
    for (const auto& a : w.args) args.push_back(node_json(a));
    jw["args"] = args;
    jw["ret"] = node_json(w.ret);
    jw["covered"] = [&] {
      json c = json::array();
      for (const auto& a : w.args) c.push_back(a.covered);
      c.push_back(w.ret.covered);
      return c;
    }();
    jw["ops"] = w.ops;
    ws.push_back(jw);
  }
  j["wrappers"] = ws;
  j["warnings"] = ip.warnings;
  return j.dump(2) + "\n";
}

InstrumentedProgram read_sidecar(const ir::Program& program, std::string_view sidecar_json) {
  json j;
  try {
    j = json::parse(sidecar_json);
  } catch (const json::exception& e) {
    throw InstrumentError(std::string("malformed sidecar: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kSidecarSchema)
      throw InstrumentError("unsupported sidecar schema " + j.at("schema").get<std::string>());
    InstrumentedProgram ip;
    ip.program = program;
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw InstrumentError("unknown mode in sidecar");
    ip.mode = *mode;
    ip.containers = j.at("containers").get<std::vector<std::string>>();
    for (const auto& ju : j.at("units")) {
      spec::SandboxUnit u;
      u.id = ju.at("id").get<UnitId>();
      std::string kind = ju.at("kind").get<std::string>();
      u.decl.kind = kind == "function" ? spec::UnitKind::Function
                    : kind == "type"   ? spec::UnitKind::Type
                                       : spec::UnitKind::Crate;
      u.decl.path = ju.at("path").get<std::string>();
      u.decl.transient = ju.at("transient").get<bool>();
      u.decl.syscalls = ju.at("syscalls").get<std::vector<std::string>>();
      u.entry_functions = ju.at("entries").get<std::set<std::string>>();
      u.declared_members = ju.at("members").get<std::set<std::string>>();
      u.cloned_helpers = ju.at("helpers").get<std::set<std::string>>();
      ip.units.push_back(std::move(u));
    }
    for (const auto& jd : j.at("shared_domains"))
      ip.plan.domains.push_back(analysis::SharedDomain{jd.at("id").get<std::uint32_t>(),
                                                       jd.at("participants").get<std::set<UnitId>>()});
    for (const auto& js : j.at("alloc_sites"))
      ip.plan.site_domain[ir::StmtRef{js.at("function").get<std::string>(),
                                      js.at("index").get<std::size_t>()}] =
          js.at("domain").get<std::uint32_t>();
    for (const auto& jw : j.at("wrappers")) {
      WrapperInfo w;
      w.name = jw.at("name").get<std::string>();
      w.target = jw.at("target").get<std::string>();
      w.caller_unit = jw.at("caller_unit").get<UnitId>();
      w.callee_unit = jw.at("callee_unit").get<UnitId>();
      w.transient = jw.at("transient").get<bool>();
      w.ops = jw.at("ops").get<std::vector<std::string>>();
      const auto* target = program.find_function(w.target);
      if (!target) throw InstrumentError("sidecar wrapper targets unknown function " + w.target);
      if (!program.find_function(w.name))
        throw InstrumentError("sidecar names wrapper " + w.name + " missing from the program");
      auto covered = jw.at("covered").get<std::vector<bool>>();
      if (covered.size() != target->param_count + 1)
        throw InstrumentError("sidecar plan arity mismatch for " + w.name);
      for (std::uint32_t i = 0; i < target->param_count; ++i)
        w.args.push_back(copy_plan_for_type(program, target->locals[i + 1], ip.mode, covered[i]));
      w.ret = copy_plan_for_type(program, target->return_type(), ip.mode, covered.back());
      for (std::size_t i = 0; i < w.args.size(); ++i)
        if (node_json(w.args[i]) != jw.at("args").at(i))
          throw InstrumentError("sidecar copy plan for " + w.name + " does not match the program");
      ip.wrappers.push_back(std::move(w));
    }
    ip.warnings = j.at("warnings").get<std::vector<std::string>>();
    return ip;
  } catch (const json::exception& e) {
    throw InstrumentError(std::string("malformed sidecar: ") + e.what());
  }
}

}  // namespace compart::instrument
