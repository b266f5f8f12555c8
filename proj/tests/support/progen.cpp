#include "progen.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace compart::testkit {

std::vector<std::uint64_t> GeneratedCase::exhaustive_seeds() const {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << decisions); ++s) out.push_back(s);
  return out;
}

namespace {

enum class Ty { I32, Vec, S, RefI32, RefVec, RefS };
constexpr Ty kAllTypes[] = {Ty::I32, Ty::Vec, Ty::S, Ty::RefI32, Ty::RefVec, Ty::RefS};

std::string type_text(Ty t) {
  switch (t) {
    case Ty::I32: return "i32";
    case Ty::Vec: return "vec<i32>";
    case Ty::S: return "app::S";
    case Ty::RefI32: return "&i32";
    case Ty::RefVec: return "&mut vec<i32>";
    case Ty::RefS: return "&mut app::S";
  }
  return "?";
}

std::optional<Ty> referent(Ty t) {
  switch (t) {
    case Ty::RefI32: return Ty::I32;
    case Ty::RefVec: return Ty::Vec;
    case Ty::RefS: return Ty::S;
    default: return std::nullopt;
  }
}

struct Sig {
  std::string path;
  std::vector<Ty> params;
  Ty ret = Ty::I32;
  int decisions = 0;
};

using Init = std::set<std::string>;

class FunctionGen {
 public:
  FunctionGen(std::mt19937_64& rng, const GenConfig& cfg, const std::vector<Sig>& sigs,
              std::size_t index, int& branches_left)
      : rng_(rng), cfg_(cfg), sigs_(sigs), me_(index), branches_left_(branches_left) {}

  std::string run(std::vector<Ty> lets) {
    const Sig& sig = sigs_[me_];
    locals_.push_back(sig.ret);
    for (Ty t : sig.params) locals_.push_back(t);
    for (Ty t : lets) locals_.push_back(t);
    Init init;
    for (std::size_t i = 1; i <= sig.params.size(); ++i) init_whole(init, i);

    int target = std::uniform_int_distribution<int>(3, cfg_.max_statements)(rng_);
    body_ = "  bb0:\n";
    init = block(init, target - 2, /*depth=*/0);
    if (!is_init(init, 0)) {
      emit(sig.ret == Ty::Vec ? "v0 = alloc vec<i32>, " + std::to_string(pick(1, 3)) + ";"
                              : "v0 = " + std::to_string(pick(0, 9)) + ";");
    }
    emit("return;");

    std::ostringstream os;
    os << "  pub fn " << sig.path.substr(sig.path.rfind("::") + 2) << "(";
    for (std::size_t i = 0; i < sig.params.size(); ++i)
      os << (i ? ", " : "") << "v" << i + 1 << ": " << type_text(sig.params[i]);
    os << ") -> " << type_text(sig.ret) << " {\n";
    for (std::size_t i = sig.params.size() + 1; i < locals_.size(); ++i)
      os << "    let v" << i << ": " << type_text(locals_[i]) << ";\n";
    os << body_ << "  }\n";
    return os.str();
  }

  int statements() const { return used_; }
  int decisions() const { return decisions_; }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <typename T>
  const T& choose(const std::vector<T>& xs) {
    return xs[static_cast<std::size_t>(pick(0, static_cast<int>(xs.size()) - 1))];
  }

  void emit(const std::string& s) {
    body_ += "    " + s + "\n";
    ++used_;
  }
  void label(const std::string& l) { body_ += "  " + l + ":\n"; }
  std::string fresh_label() { return "bb" + std::to_string(++labels_); }

  static std::string v(std::size_t k) { return "v" + std::to_string(k); }

  bool is_init(const Init& in, std::size_t k) const { return in.count(v(k)) > 0; }
  void init_whole(Init& in, std::size_t k) const {
    in.insert(v(k));
    if (locals_[k] == Ty::S) {
      in.insert(v(k) + ".a");
      in.insert(v(k) + ".v");
    }
  }
  void init_field(Init& in, std::size_t k, const std::string& f) const {
    in.insert(v(k) + "." + f);
    if (in.count(v(k) + ".a") && in.count(v(k) + ".v")) in.insert(v(k));
  }

  // Readable places of type t.
  std::vector<std::string> sources(const Init& in, Ty t) const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < locals_.size(); ++k) {
      const Ty lt = locals_[k];
      const std::string n = v(k);
      if (lt == t && is_init(in, k)) out.push_back(n);
      if (lt == Ty::S) {
        if (t == Ty::I32 && in.count(n + ".a")) out.push_back(n + ".a");
        if (t == Ty::Vec && in.count(n + ".v")) out.push_back(n + ".v");
        if (t == Ty::I32 && in.count(n + ".v")) out.push_back(n + ".v[0]");
      }
      if (!is_init(in, k)) continue;
      if (lt == Ty::Vec && t == Ty::I32) out.push_back(n + "[0]");
      if (lt == Ty::RefI32 && t == Ty::I32) out.push_back("(*" + n + ")");
      if (lt == Ty::RefVec && t == Ty::Vec) out.push_back("(*" + n + ")");
      if (lt == Ty::RefVec && t == Ty::I32) out.push_back("(*" + n + ")[0]");
      if (lt == Ty::RefS && t == Ty::S) out.push_back("(*" + n + ")");
      if (lt == Ty::RefS && t == Ty::I32) {
        out.push_back("(*" + n + ").a");
        out.push_back("(*" + n + ").v[0]");
      }
      if (lt == Ty::RefS && t == Ty::Vec) out.push_back("(*" + n + ").v");
    }
    return out;
  }

  struct Dest {
    std::string text;
    std::function<void(Init&)> mark;
  };

  // Writable places of type t, with the init facts a write establishes.
  std::vector<Dest> dests(const Init& in, Ty t) const {
    std::vector<Dest> out;
    auto none = [](Init&) {};
    for (std::size_t k = 0; k < locals_.size(); ++k) {
      const Ty lt = locals_[k];
      const std::string n = v(k);
      if (lt == t) out.push_back({n, [this, k](Init& i) { init_whole(i, k); }});
      if (lt == Ty::S && t == Ty::I32) out.push_back({n + ".a", [this, k](Init& i) { init_field(i, k, "a"); }});
      if (lt == Ty::S && t == Ty::Vec) out.push_back({n + ".v", [this, k](Init& i) { init_field(i, k, "v"); }});
      if (lt == Ty::S && t == Ty::I32 && in.count(n + ".v")) out.push_back({n + ".v[0]", none});
      if (!is_init(in, k)) continue;
      if (lt == Ty::Vec && t == Ty::I32) out.push_back({n + "[0]", none});
      if (referent(lt) == t) out.push_back({"(*" + n + ")", none});
      if (lt == Ty::RefVec && t == Ty::I32) out.push_back({"(*" + n + ")[0]", none});
      if (lt == Ty::RefS && t == Ty::I32) {
        out.push_back({"(*" + n + ").a", none});
        out.push_back({"(*" + n + ").v[0]", none});
      }
      if (lt == Ty::RefS && t == Ty::Vec) out.push_back({"(*" + n + ").v", none});
    }
    return out;
  }

  std::string int_operand(const Init& in) {
    auto src = sources(in, Ty::I32);
    if (src.empty() || chance(0.3)) return std::to_string(pick(0, 9));
    return choose(src);
  }

  // A readable place of type t, emitting (into prelude) whatever makes one exist.
  std::optional<std::string> make_source(Init& in, Ty t, std::vector<std::string>& prelude) {
    auto s = sources(in, t);
    if (!s.empty() && chance(0.7)) return choose(s);
    std::vector<std::size_t> slots;
    for (std::size_t k = 1; k < locals_.size(); ++k)
      if (locals_[k] == t) slots.push_back(k);
    if (slots.empty()) return s.empty() ? std::nullopt : std::optional(choose(s));
    std::size_t k = choose(slots);
    switch (t) {
      case Ty::I32: prelude.push_back(v(k) + " = " + std::to_string(pick(0, 9)) + ";"); break;
      case Ty::Vec: prelude.push_back(v(k) + " = alloc vec<i32>, " + std::to_string(pick(1, 3)) + ";"); break;
      case Ty::S:
        prelude.push_back(v(k) + ".a = " + std::to_string(pick(0, 9)) + ";");
        prelude.push_back(v(k) + ".v = alloc vec<i32>, " + std::to_string(pick(1, 3)) + ";");
        break;
      default: {
        auto r = make_source(in, *referent(t), prelude);
        if (!r) return std::nullopt;
        prelude.push_back(v(k) + (t == Ty::RefI32 ? " = &" : " = &mut ") + *r + ";");
      }
    }
    init_whole(in, k);
    return v(k);
  }

  // One straight-line statement; false when the chosen shape is impossible here.
  bool simple(Init& in, int room) {
    int kind = pick(0, 12);
    if (!called_ && me_ + 1 < sigs_.size() && chance(0.5)) kind = 8;
    switch (kind) {
      case 0:
      case 1: {  // alloc
        auto d = dests(in, Ty::Vec);
        if (d.empty()) return false;
        const auto& dst = choose(d);
        emit(dst.text + " = alloc vec<i32>, " + std::to_string(pick(1, 3)) + ";");
        dst.mark(in);
        return true;
      }
      case 2: {  // constant or arithmetic
        auto d = dests(in, Ty::I32);
        if (d.empty()) return false;
        const auto& dst = choose(d);
        static const std::vector<std::string> ops = {"add", "sub", "mul"};
        if (chance(0.4)) emit(dst.text + " = " + std::to_string(pick(0, 9)) + ";");
        else emit(dst.text + " = " + choose(ops) + " " + int_operand(in) + ", " + int_operand(in) + ";");
        dst.mark(in);
        return true;
      }
      case 3:
      case 4: {  // copy
        Ty t = kAllTypes[pick(0, 5)];
        auto s = sources(in, t);
        auto d = dests(in, t);
        if (s.empty() || d.empty()) return false;
        const auto& dst = choose(d);
        emit(dst.text + " = " + choose(s) + ";");
        dst.mark(in);
        return true;
      }
      case 5:
      case 6: {  // borrow
        Ty r = kAllTypes[pick(3, 5)];
        auto s = sources(in, *referent(r));
        auto d = dests(in, r);
        if (s.empty() || d.empty()) return false;
        const auto& dst = choose(d);
        emit(dst.text + (r == Ty::RefI32 ? " = &" : " = &mut ") + choose(s) + ";");
        dst.mark(in);
        return true;
      }
      case 7: {  // len
        auto s = sources(in, Ty::Vec);
        auto d = dests(in, Ty::I32);
        if (s.empty() || d.empty()) return false;
        const auto& dst = choose(d);
        emit(dst.text + " = len " + choose(s) + ";");
        dst.mark(in);
        return true;
      }
      case 8:
      case 9:
      case 10: {  // call
        std::vector<std::size_t> callees;
        for (std::size_t j = me_ + 1; j < sigs_.size(); ++j)
          if (decisions_ + sigs_[j].decisions <= cfg_.max_decisions) callees.push_back(j);
        if (callees.empty()) return false;
        const Sig& c = sigs_[choose(callees)];
        // Missing arguments are built by a short prelude planned before anything is emitted.
        std::vector<std::string> prelude;
        Init planned = in;
        std::string args;
        for (Ty t : c.params) {
          auto a = make_source(planned, t, prelude);
          if (!a) return false;
          args += (args.empty() ? "" : ", ") + *a;
        }
        if (static_cast<int>(prelude.size()) + 1 > room) return false;
        auto d = dests(planned, c.ret);
        if (d.empty()) return false;
        const auto& dst = choose(d);
        for (const auto& line : prelude) emit(line);
        in = planned;
        emit(dst.text + " = call " + c.path + "(" + args + ");");
        dst.mark(in);
        decisions_ += c.decisions;
        called_ = true;
        return true;
      }
      case 11: {  // output
        emit("syscall write(1, " + int_operand(in) + ");");
        return true;
      }
      default: {  // element update
        std::vector<Dest> d;
        for (auto& x : dests(in, Ty::I32))
          if (x.text.back() == ']') d.push_back(std::move(x));
        if (d.empty()) return false;
        emit(choose(d).text + " = " + int_operand(in) + ";");
        return true;
      }
    }
  }

  Init block(Init in, int budget, int depth) {
    while (used_ < budget) {
      const int room = budget - used_;
      if (depth < 2 && room >= 3 && branches_left_ > 0 && decisions_ < cfg_.max_decisions &&
          chance(0.25)) {
        in = diamond(in, budget, depth);
        continue;
      }
      bool ok = false;
      for (int tries = 0; tries < 30 && !ok; ++tries) ok = simple(in, budget - used_);
      if (!ok) emit("syscall write(1, 0);");
    }
    return in;
  }

  Init diamond(const Init& in, int budget, int depth) {
    --branches_left_;
    ++decisions_;
    std::string a = fresh_label(), b = fresh_label(), join = fresh_label();
    emit("branch " + a + ", " + b + ";");
    const int room = budget - used_ - 1;  // one slot for the goto
    int first = pick(0, room / 2);
    label(a);
    Init left = block(in, used_ + first, depth + 1);
    bool returns = is_init(left, 0) && chance(0.2);
    emit(returns ? "return;" : "goto " + join + ";");
    label(b);
    Init right = block(in, used_ + pick(0, std::max(0, budget - used_)), depth + 1);
    label(join);
    if (returns) return right;
    Init both;
    std::set_intersection(left.begin(), left.end(), right.begin(), right.end(),
                          std::inserter(both, both.begin()));
    return both;
  }

  std::mt19937_64& rng_;
  const GenConfig& cfg_;
  const std::vector<Sig>& sigs_;
  std::size_t me_;
  int& branches_left_;
  std::vector<Ty> locals_;
  std::string body_;
  int used_ = 0;
  int labels_ = 0;
  int decisions_ = 0;
  bool called_ = false;
};

}  // namespace

GeneratedCase generate_case(std::uint64_t seed, const GenConfig& cfg) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  // Vec-carrying types are favoured so that boundary calls move heap data.
  std::discrete_distribution<int> type_weights({1, 3, 2, 1, 3, 2});
  auto any_type = [&] { return kAllTypes[type_weights(rng)]; };

  GeneratedCase gc;
  gc.seed = seed;
  const int n = pick(2, cfg.max_functions);
  const bool crates = cfg.allow_crates && chance(0.3);

  std::vector<Sig> sigs(static_cast<std::size_t>(n));
  std::vector<bool> in_lib(sigs.size(), false);
  sigs[0].path = "app::main";
  for (std::size_t i = 1; i < sigs.size(); ++i) {
    in_lib[i] = crates && chance(0.6);
    sigs[i].path = std::string(in_lib[i] ? "lib" : "app") + "::f" + std::to_string(i);
    for (int k = pick(1, 2); k > 0; --k) sigs[i].params.push_back(any_type());
    sigs[i].ret = chance(0.35) ? Ty::Vec : Ty::I32;
  }

  // Callees first so their decision counts are known to callers.
  int branches_left = cfg.max_branches;
  std::vector<std::string> bodies(sigs.size());
  for (std::size_t i = sigs.size(); i-- > 0;) {
    std::vector<Ty> lets;
    for (int k = pick(2, 4); k > 0; --k) lets.push_back(any_type());
    FunctionGen g(rng, cfg, sigs, i, branches_left);
    bodies[i] = g.run(lets);
    sigs[i].decisions = g.decisions();
    gc.max_statements = std::max(gc.max_statements, g.statements());
  }
  gc.functions = n;
  gc.branches = cfg.max_branches - branches_left;
  gc.decisions = sigs[0].decisions;

  std::ostringstream prog;
  prog << "entry app::main;\n\nstruct S { a: i32, v: vec<i32>, }\n\ncrate app {\n";
  for (std::size_t i = 0; i < sigs.size(); ++i)
    if (!in_lib[i]) prog << bodies[i];
  prog << "}\n";
  if (std::find(in_lib.begin(), in_lib.end(), true) != in_lib.end()) {
    prog << "\ncrate lib {\n";
    for (std::size_t i = 0; i < sigs.size(); ++i)
      if (in_lib[i]) prog << bodies[i];
    prog << "}\n";
  }
  gc.program = prog.str();

  auto decl = [&](const std::string& key) {
    return key + " = { transient = " + (chance(0.5) ? "true" : "false") +
           ", syscalls = [\"write\"] }\n";
  };
  std::string fns, crate_units;
  for (std::size_t i = 1; i < sigs.size(); ++i)
    if (!in_lib[i] && (chance(0.6) || (i == 1 && !crates))) fns += decl(sigs[i].path);
  if (std::find(in_lib.begin(), in_lib.end(), true) != in_lib.end()) crate_units = decl("lib");
  if (!fns.empty()) gc.spec += "[functions]\n" + fns;
  if (!crate_units.empty()) gc.spec += "[crates]\n" + crate_units;
  return gc;
}

}  // namespace compart::testkit
