#include "compart/interp.hpp"

#include <algorithm>
#include <sstream>

namespace compart::interp {

using runtime::Address;
using runtime::DomainId;

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Completed: return "completed";
    case Status::Violated: return "violated";
    case Status::Panicked: return "panicked";
    case Status::BudgetExceeded: return "budget-exceeded";
  }
  return "?";
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Create: return "create";
    case EventKind::Enter: return "enter";
    case EventKind::Exit: return "exit";
    case EventKind::Destroy: return "destroy";
    case EventKind::Alloc: return "alloc";
    case EventKind::Free: return "free";
    case EventKind::Copy: return "copy";
    case EventKind::Syscall: return "syscall";
    case EventKind::Stdout: return "stdout";
    case EventKind::Violation: return "violation";
    case EventKind::Access: return "access";
  }
  return "?";
}

std::string Event::to_string() const {
  std::string s = std::string(event_kind_name(kind)) + " domain=" + std::to_string(domain);
  if (!detail.empty()) s += " " + detail;
  return s;
}

std::string Stats::to_string() const {
  std::ostringstream os;
  os << "copies=" << copies << " bytes_copied=" << bytes_copied
     << " heap_object_copies=" << heap_object_copies << " restores=" << restores
     << " domain_switches=" << domain_switches << " allocations={";
  bool first = true;
  for (const auto& [d, n] : allocations) {
    os << (first ? "" : ",") << d << ":" << n;
    first = false;
  }
  os << "}";
  return os.str();
}

std::string Outcome::trace_text() const {
  std::string out;
  for (const auto& e : trace) out += e.to_string() + "\n";
  return out;
}

bool OracleReport::inconclusive() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const OracleRun& r) { return r.status != Status::Completed; });
}

namespace {

using Bytes = std::vector<std::uint8_t>;
using instrument::CopyNode;

std::int64_t get_cell(const Bytes& b, std::size_t off) {
  std::int64_t v = 0;
  std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(off), sizeof v,
              reinterpret_cast<std::uint8_t*>(&v));
  return v;
}

void set_cell(Bytes& b, std::size_t off, std::int64_t v) {
  std::copy_n(reinterpret_cast<const std::uint8_t*>(&v), sizeof v,
              b.begin() + static_cast<std::ptrdiff_t>(off));
}

Bytes cell_bytes(std::int64_t v) {
  Bytes b(ir::kCellSize);
  set_cell(b, 0, v);
  return b;
}

struct Halt {
  Status status;
  std::optional<runtime::Violation> violation;
  std::string message;
};

struct Layout {
  std::vector<std::uint64_t> offsets;  // per local, relative to the frame base
  std::uint64_t size = 0;
};

struct Frame {
  const ir::FunctionDef* fn;
  Address base;
  const Layout* layout;
};

struct Loc {
  Address addr;
  ir::TypeExpr type;
};

struct CopyRecord {
  Address original = 0;
  Address copy = 0;
  std::uint64_t size = 0;
  std::uint64_t elem_size = 0;
  std::uint64_t count = 1;
  CopyNode plan;  // plan of the referent, or of each vec element
  bool is_vec = false;
};

struct Transfer {
  DomainId target = runtime::kRootDomain;
  std::vector<CopyRecord> records;
  std::map<Address, Address> back;  // callee object -> caller copy made on return
  std::set<Address> in_progress;
};

class Machine {
 public:
  Machine(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
          const RunOptions& opt, const instrument::InstrumentedProgram* ip, bool oracle)
      : p_(p),
        units_(units),
        opt_(opt),
        ip_(ip),
        oracle_(oracle),
        table_(runtime::unit_policies(units), opt.config) {
    for (const auto* f : p_.functions()) declared_[f->path] = spec::declared_unit_of(units_, f->path);
  }

  Outcome execute() {
    try {
      if (ip_ && ip_->mode == instrument::Mode::Share) {
        for (const auto& d : ip_->plan.domains) {
          table_.create_shared_domain(d.id, d.participants);
          std::string who;
          for (auto u : d.participants) who += (who.empty() ? "" : ",") + unit_label(u);
          event(EventKind::Create, d.id, "kind=shared participants=" + who);
        }
      }
      const auto* entry = p_.find_function(p_.entry);
      if (!entry) throw Halt{Status::Panicked, std::nullopt, "entry function missing"};
      Bytes ret = call_function(*entry, {});
      out_.status = Status::Completed;
      out_.return_value = ret.size() >= ir::kCellSize ? get_cell(ret, 0) : 0;
    } catch (const Halt& h) {
      out_.status = h.status;
      out_.violation = h.violation;
      out_.message = h.message;
    }
    for (const auto* d : table_.domains()) out_.domains.push_back(*d);
    return std::move(out_);
  }

  std::map<ir::StmtRef, std::set<UnitId>> crossing() const {
    std::map<ir::StmtRef, std::set<UnitId>> out;
    for (const auto& [base, obj] : objects_) {
      auto t = touchers_.find(base);
      if (t == touchers_.end() || t->second.size() < 2) continue;
      out[obj.second].insert(t->second.begin(), t->second.end());
    }
    return out;
  }

 private:
  // -- bookkeeping -----------------------------------------------------------

  void event(EventKind k, DomainId d, std::string detail) {
    out_.trace.push_back(Event{k, d, std::move(detail)});
  }

  [[noreturn]] void panic(const std::string& msg) {
    throw Halt{Status::Panicked, std::nullopt, msg + " at " + loc_.to_string()};
  }

  [[noreturn]] void violate(runtime::Violation v) {
    v.location = loc_.to_string();
    event(EventKind::Violation, v.context,
          "kind=" + std::string(runtime::violation_kind_name(v.kind)) +
              (v.address ? " addr=" + std::to_string(*v.address) : "") +
              (v.syscall.empty() ? "" : " syscall=" + v.syscall) + " at=" + v.location);
    throw Halt{Status::Violated, std::move(v), {}};
  }

  UnitId unit_now() const {
    if (ip_) {
      const auto& d = table_.domain(table_.current());
      return d.kind == runtime::DomainKind::Sandbox ? d.unit : kRootUnit;
    }
    return logical_.empty() ? kRootUnit : logical_.back();
  }

  const Layout& layout_of(const ir::FunctionDef& f) {
    auto it = layouts_.find(&f);
    if (it != layouts_.end()) return it->second;
    Layout l;
    std::uint64_t off = ir::kCellSize;  // link cell
    for (const auto& t : f.locals) {
      l.offsets.push_back(off);
      off += ir::type_size(p_, t);
    }
    l.size = off;
    return layouts_[&f] = std::move(l);
  }

  Address alloc_in(DomainId d, std::uint64_t size) {
    try {
      Address a = table_.domain_alloc(d, size);
      ++out_.stats.allocations[d];
      return a;
    } catch (const runtime::RuntimeError& e) {
      panic(e.what());
    }
  }

  // -- guest memory ----------------------------------------------------------

  void touch(Address a) {
    auto it = objects_.upper_bound(a);
    if (it == objects_.begin()) return;
    --it;
    if (a - it->first < it->second.first) touchers_[it->first].insert(unit_now());
  }

  void guard(Address a, std::uint64_t n, bool write) {
    if (oracle_) {
      auto owner = table_.owner_of(a);
      if (!owner || table_.owner_of(a + n - 1) != owner)
        panic("wild access to address " + std::to_string(a));
      touch(a);
      return;
    }
    if (auto v = table_.check_access(table_.current(), a, write, n)) violate(*v);
    if (opt_.trace_access)
      event(EventKind::Access, table_.current(),
            std::string(write ? "write" : "read") + " addr=" + std::to_string(a) +
                " size=" + std::to_string(n));
  }

  Bytes load(Address a, std::uint64_t n) {
    guard(a, n, false);
    Bytes b(n);
    table_.read(a, b);
    return b;
  }

  void store(Address a, const Bytes& b) {
    guard(a, b.size(), true);
    table_.write(a, b);
  }

  // Transition-layer accesses run with monitor rights but still trap on
  // wild or stale addresses.
  Bytes mon_load(Address a, std::uint64_t n) {
    if (auto v = table_.check_access(runtime::kMonitorDomain, a, false, n)) violate(*v);
    Bytes b(n);
    table_.read(a, b);
    return b;
  }

  void mon_store(Address a, const Bytes& b) {
    if (auto v = table_.check_access(runtime::kMonitorDomain, a, true, b.size())) violate(*v);
    table_.write(a, b);
  }

  // -- places ----------------------------------------------------------------

  std::int64_t local_cell(const Frame& fr, ir::LocalIndex l) {
    return get_cell(load(fr.base + fr.layout->offsets.at(l), ir::kCellSize), 0);
  }

  Loc place_loc(const Frame& fr, const ir::Place& pl) {
    Loc loc{fr.base + fr.layout->offsets.at(pl.local), fr.fn->locals.at(pl.local)};
    for (const auto& pr : pl.projections) {
      switch (pr.kind) {
        case ir::Projection::Kind::Deref:
          loc.addr = static_cast<Address>(get_cell(load(loc.addr, ir::kCellSize), 0));
          loc.type = ir::TypeExpr(loc.type.inner());
          break;
        case ir::Projection::Kind::Field: {
          const auto* agg = p_.find_aggregate(loc.type.name());
          loc.addr += ir::field_offset(p_, *agg, pr.field);
          loc.type = *agg->field_type(pr.field);
          break;
        }
        case ir::Projection::Kind::Index: {
          Bytes h = load(loc.addr, 2 * ir::kCellSize);
          auto ptr = static_cast<Address>(get_cell(h, 0));
          std::int64_t len = get_cell(h, ir::kCellSize);
          std::int64_t idx = pr.index_local ? local_cell(fr, *pr.index_local) : pr.index_const;
          if (idx < 0 || idx >= len)
            panic("index out of bounds: the len is " + std::to_string(len) + " but the index is " +
                  std::to_string(idx));
          loc.type = ir::TypeExpr(loc.type.inner());
          loc.addr = ptr + static_cast<Address>(idx) * ir::type_size(p_, loc.type);
          break;
        }
      }
    }
    return loc;
  }

  Bytes read_place(const Frame& fr, const ir::Place& pl) {
    Loc l = place_loc(fr, pl);
    return load(l.addr, ir::type_size(p_, l.type));
  }

  std::int64_t operand_value(const Frame& fr, const ir::Operand& o) {
    switch (o.kind) {
      case ir::Operand::Kind::Copy: return get_cell(read_place(fr, o.place), 0);
      case ir::Operand::Kind::Int: return o.int_value;
      case ir::Operand::Kind::Bool: return o.bool_value ? 1 : 0;
      case ir::Operand::Kind::Str: return 0;
    }
    return 0;
  }

  Address raw_address(const Frame& fr, const ir::RawAddress& raw) {
    Loc l = place_loc(fr, raw.base);
    Address base = raw.location_of ? l.addr
                                   : static_cast<Address>(get_cell(load(l.addr, ir::kCellSize), 0));
    return base + static_cast<Address>(raw.offset);
  }

  // -- execution -------------------------------------------------------------

  Bytes call_function(const ir::FunctionDef& f, const std::vector<Bytes>& args) {
    if (++depth_ > opt_.max_call_depth) panic("stack overflow");
    const Layout& layout = layout_of(f);
    DomainId dom = table_.current();
    Address frame;
    try {
      frame = table_.push_frame(dom, layout.size);
    } catch (const runtime::RuntimeError& e) {
      panic(e.what());
    }
    table_.store_cell(frame, static_cast<std::int64_t>(caller_frame_));
    for (std::size_t i = 0; i < args.size(); ++i) table_.write(frame + layout.offsets[i + 1], args[i]);
    Address saved_frame = caller_frame_;
    caller_frame_ = frame;
    UnitId declared = declared_.count(f.path) ? declared_.at(f.path) : kRootUnit;
    logical_.push_back(declared != kRootUnit ? declared : unit_now());

    Frame fr{&f, frame, &layout};
    exec_body(fr);
    Bytes ret = load(frame + layout.offsets[0], ir::type_size(p_, f.return_type()));

    logical_.pop_back();
    caller_frame_ = saved_frame;
    table_.pop_frame(dom, frame);
    --depth_;
    return ret;
  }

  bool decide() {
    std::size_t i = decisions_++;
    bool second = i < 64 && ((opt_.seed >> i) & 1u);
    out_.decisions.push_back(second);
    return second;
  }

  void exec_body(const Frame& fr) {
    const auto& f = *fr.fn;
    std::size_t pc = 0;
    const std::size_t n = f.statement_count();
    while (pc < n) {
      if (++out_.steps > opt_.step_budget)
        throw Halt{Status::BudgetExceeded, std::nullopt,
                   "step budget of " + std::to_string(opt_.step_budget) + " exhausted"};
      const auto& s = f.statement(pc);
      loc_ = ir::StmtRef{f.path, pc};
      std::size_t next = pc + 1;
      using K = ir::Statement::Kind;
      switch (s.kind) {
        case K::Assign: assign(fr, s); break;
        case K::Call: call(fr, s); break;
        case K::Alloc: alloc(fr, s); break;
        case K::Syscall: syscall(fr, s); break;
        case K::Branch: next = *f.block_start(s.targets.at(decide() ? 1 : 0)); break;
        case K::Goto: next = *f.block_start(s.targets.at(0)); break;
        case K::Return: return;
        case K::RawStore: {
          Address a = raw_address(fr, s.raw);
          store(a, cell_bytes(operand_value(fr, s.src)));
          break;
        }
        case K::RawLoad: {
          Address a = raw_address(fr, s.raw);
          Bytes v = load(a, ir::kCellSize);
          store(place_loc(fr, *s.dst).addr, v);
          break;
        }
      }
      pc = next;
    }
  }

  static std::int64_t wrap32(std::int64_t v) {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint64_t>(v)));
  }

  void assign(const Frame& fr, const ir::Statement& s) {
    const auto& rv = s.rvalue;
    Bytes value;
    switch (rv.kind) {
      case ir::Rvalue::Kind::Use:
        value = rv.lhs.kind == ir::Operand::Kind::Copy ? read_place(fr, rv.lhs.place)
                                                       : cell_bytes(operand_value(fr, rv.lhs));
        break;
      case ir::Rvalue::Kind::AddrOf:
        value = cell_bytes(static_cast<std::int64_t>(place_loc(fr, rv.place).addr));
        break;
      case ir::Rvalue::Kind::Binary: {
        std::int64_t a = operand_value(fr, rv.lhs), b = operand_value(fr, rv.rhs), r = 0;
        switch (rv.op) {
          case ir::BinOp::Add: r = wrap32(a + b); break;
          case ir::BinOp::Sub: r = wrap32(a - b); break;
          case ir::BinOp::Mul: r = wrap32(static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                                                   static_cast<std::uint64_t>(b)));
            break;
          case ir::BinOp::Eq: r = a == b; break;
          case ir::BinOp::Lt: r = a < b; break;
        }
        value = cell_bytes(r);
        break;
      }
      case ir::Rvalue::Kind::Len: {
        Loc l = place_loc(fr, rv.place);
        value = cell_bytes(get_cell(load(l.addr + ir::kCellSize, ir::kCellSize), 0));
        break;
      }
    }
    store(place_loc(fr, *s.dst).addr, value);
  }

  void call(const Frame& fr, const ir::Statement& s) {
    std::vector<Bytes> args;
    for (const auto& a : s.args) args.push_back(read_place(fr, a));
    const auto* callee = p_.find_function(s.callee);
    Bytes ret;
    const instrument::WrapperInfo* w = ip_ ? ip_->find_wrapper(s.callee) : nullptr;
    ir::StmtRef site = loc_;
    ret = w ? wrapper_call(*w, args) : call_function(*callee, args);
    loc_ = site;
    if (s.dst) store(place_loc(fr, *s.dst).addr, ret);
  }

  void alloc(const Frame& fr, const ir::Statement& s) {
    std::uint64_t esize = ir::type_size(p_, s.elem);
    DomainId d = table_.current();
    if (ip_ && s.shared_domain) {
      if (!table_.has_domain(*s.shared_domain))
        panic("shared domain " + std::to_string(*s.shared_domain) + " was never created");
      d = *s.shared_domain;
    }
    Address a = 0;
    if (s.length > 0) {
      std::uint64_t size = esize * static_cast<std::uint64_t>(s.length);
      a = alloc_in(d, size);
      event(EventKind::Alloc, d,
            "addr=" + std::to_string(a) + " size=" + std::to_string(size) + " site=" +
                loc_.to_string());
      if (oracle_) {
        objects_[a] = {size, loc_};
        touch(a);
      }
    }
    Bytes handle(2 * ir::kCellSize);
    set_cell(handle, 0, static_cast<std::int64_t>(a));
    set_cell(handle, ir::kCellSize, s.length);
    store(place_loc(fr, *s.dst).addr, handle);
  }

  void syscall(const Frame& fr, const ir::Statement& s) {
    std::vector<runtime::SyscallArg> args;
    std::string shown;
    for (const auto& a : s.sys_args) {
      if (a.kind == ir::Operand::Kind::Str) {
        args.emplace_back(a.str_value);
        shown += (shown.empty() ? "" : ",") + ("\"" + a.str_value + "\"");
      } else {
        std::int64_t v = operand_value(fr, a);
        args.emplace_back(v);
        shown += (shown.empty() ? "" : ",") + std::to_string(v);
      }
    }
    DomainId ctx = table_.current();
    if (!oracle_)
      if (auto v = table_.filter_syscall(ctx, s.syscall, args)) violate(*v);
    event(EventKind::Syscall, ctx, "name=" + s.syscall + " args=" + shown);
    std::int64_t result = 0;
    if (s.syscall == "write") {
      std::string line;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (i > 1) line += " ";
        if (const auto* str = std::get_if<std::string>(&args[i])) line += *str;
        else line += std::to_string(std::get<std::int64_t>(args[i]));
      }
      out_.stdout_lines.push_back(line);
      event(EventKind::Stdout, ctx, line);
      result = static_cast<std::int64_t>(line.size());
    } else if (s.syscall == "getpid") {
      result = 4242;
    } else if (s.syscall == "open" || s.syscall == "openat") {
      result = 3;
    } else if (s.syscall == "mmap") {
      if (!args.empty())
        if (const auto* v = std::get_if<std::int64_t>(&args[0])) result = *v;
    }
    if (s.dst) store(place_loc(fr, *s.dst).addr, cell_bytes(result));
  }

  // -- boundary transitions --------------------------------------------------

  CopyNode expand(const CopyNode& n) {
    if (!n.recursive) return n;
    return instrument::copy_plan_for_type(p_, n.type, ip_->mode, n.covered);
  }

  static std::optional<Address> lookup(const std::vector<CopyRecord>& recs, Address a, bool by_copy) {
    for (const auto& r : recs) {
      Address from = by_copy ? r.copy : r.original;
      Address to = by_copy ? r.original : r.copy;
      if (a >= from && a - from < r.size) return to + (a - from);
    }
    return std::nullopt;
  }

  void copy_event(DomainId d, const char* kind, Address from, Address to, std::uint64_t size,
                  bool heap) {
    event(EventKind::Copy, d,
          std::string("kind=") + kind + " from=" + std::to_string(from) + " to=" +
              std::to_string(to) + " bytes=" + std::to_string(size));
    ++out_.stats.copies;
    out_.stats.bytes_copied += size;
    if (heap) ++out_.stats.heap_object_copies;
  }

  // Forward direction: duplicates referents into the callee domain.
  void transfer_into(Bytes& buf, std::size_t off, const CopyNode& node, Transfer& tx) {
    CopyNode plan = expand(node);
    switch (plan.action) {
      case CopyNode::Action::Bitwise:
      case CopyNode::Action::PassShared: return;
      case CopyNode::Action::Aggregate: {
        const auto* agg = p_.find_aggregate(plan.type.name());
        for (const auto& [name, fp] : plan.fields)
          transfer_into(buf, off + ir::field_offset(p_, *agg, name), fp, tx);
        return;
      }
      case CopyNode::Action::CopyReferent: {
        bool is_vec = plan.type.kind() == ir::TypeExpr::Kind::Vec;
        auto src = static_cast<Address>(get_cell(buf, off));
        std::int64_t count = is_vec ? get_cell(buf, off + ir::kCellSize) : 1;
        if (!src || count <= 0) return;
        std::uint64_t esize = ir::type_size(p_, plan.type.inner());
        set_cell(buf, off,
                 static_cast<std::int64_t>(copy_object(src, esize, static_cast<std::uint64_t>(count),
                                                       plan.referent.front(), is_vec, tx)));
        return;
      }
    }
  }

  Address copy_object(Address src, std::uint64_t esize, std::uint64_t count, const CopyNode& plan,
                      bool is_vec, Transfer& tx) {
    std::uint64_t size = esize * count;
    if (auto hit = lookup(tx.records, src, false)) return *hit;
    if (tx.in_progress.count(src)) panic("cyclic reference structure cannot be copied");
    tx.in_progress.insert(src);
    Bytes bytes = mon_load(src, size);
    for (std::uint64_t i = 0; i < count; ++i) transfer_into(bytes, i * esize, plan, tx);
    Address c = alloc_in(tx.target, size);
    table_.write(c, bytes);
    tx.in_progress.erase(src);
    tx.records.push_back(CopyRecord{src, c, size, esize, count, plan, is_vec});
    copy_event(tx.target, is_vec ? "heap" : "referent", src, c, size, is_vec);
    return c;
  }

  // Backward direction: pointers into copies map back to the originals;
  // anything the callee created is duplicated into the caller's domain.
  void untransfer_into(Bytes& buf, std::size_t off, const CopyNode& node, DomainId dest,
                       Transfer& tx) {
    CopyNode plan = expand(node);
    switch (plan.action) {
      case CopyNode::Action::Bitwise:
      case CopyNode::Action::PassShared: return;
      case CopyNode::Action::Aggregate: {
        const auto* agg = p_.find_aggregate(plan.type.name());
        for (const auto& [name, fp] : plan.fields)
          untransfer_into(buf, off + ir::field_offset(p_, *agg, name), fp, dest, tx);
        return;
      }
      case CopyNode::Action::CopyReferent: {
        bool is_vec = plan.type.kind() == ir::TypeExpr::Kind::Vec;
        auto src = static_cast<Address>(get_cell(buf, off));
        std::int64_t count = is_vec ? get_cell(buf, off + ir::kCellSize) : 1;
        if (!src || count <= 0) return;
        if (auto orig = lookup(tx.records, src, true)) {
          set_cell(buf, off, static_cast<std::int64_t>(*orig));
          return;
        }
        std::uint64_t esize = ir::type_size(p_, plan.type.inner());
        set_cell(buf, off,
                 static_cast<std::int64_t>(back_copy(src, esize, static_cast<std::uint64_t>(count),
                                                     plan.referent.front(), is_vec, dest, tx)));
        return;
      }
    }
  }

  Address back_copy(Address src, std::uint64_t esize, std::uint64_t count, const CopyNode& plan,
                    bool is_vec, DomainId dest, Transfer& tx) {
    auto memo = tx.back.find(src);
    if (memo != tx.back.end()) return memo->second;
    if (tx.in_progress.count(src)) panic("cyclic reference structure cannot be copied");
    tx.in_progress.insert(src);
    std::uint64_t size = esize * count;
    Bytes bytes = mon_load(src, size);
    for (std::uint64_t i = 0; i < count; ++i) untransfer_into(bytes, i * esize, plan, dest, tx);
    Address c = alloc_in(dest, size);
    table_.write(c, bytes);
    tx.in_progress.erase(src);
    tx.back[src] = c;
    copy_event(dest, is_vec ? "heap" : "referent", src, c, size, is_vec);
    return c;
  }

  Bytes wrapper_call(const instrument::WrapperInfo& named, const std::vector<Bytes>& args) {
    const auto* target = p_.find_function(named.target);
    UnitId here = unit_now();
    if (here == named.callee_unit) return call_function(*target, args);
    const auto* w = ip_->find_variant(named.target, here);
    if (!w) panic("no wrapper variant for " + named.target + " from " + unit_label(here));

    DomainId caller = table_.current();
    table_.enter_domain(runtime::kMonitorDomain);
    bool existed = false;
    DomainId d;
    try {
      auto persistent = table_.persistent_instance(w->callee_unit);
      existed = !w->transient && persistent.has_value();
      d = table_.create_sandbox_domain(w->callee_unit, w->transient);
    } catch (const runtime::ViolationError& e) {
      violate(e.violation());
    } catch (const runtime::RuntimeError& e) {
      panic(e.what());
    }
    if (!existed) {
      const auto& dom = table_.domain(d);
      event(EventKind::Create, d,
            "kind=sandbox unit=" + unit_label(dom.unit) + " instance=" +
                std::to_string(dom.instance) + " transient=" + (dom.transient ? "true" : "false"));
    }
    Transfer tx;
    tx.target = d;
    std::vector<Bytes> moved = args;
    for (std::size_t i = 0; i < moved.size(); ++i) transfer_into(moved[i], 0, w->args.at(i), tx);
    table_.exit_domain();

    try {
      table_.enter_domain(d);
    } catch (const runtime::ViolationError& e) {
      violate(e.violation());
    }
    event(EventKind::Enter, d, "from=" + std::to_string(caller) + " target=" + w->target);
    ++out_.stats.domain_switches;
    Bytes ret = call_function(*target, moved);
    table_.exit_domain();
    event(EventKind::Exit, d, "to=" + std::to_string(caller));
    ++out_.stats.domain_switches;

    table_.enter_domain(runtime::kMonitorDomain);
    untransfer_into(ret, 0, w->ret, caller, tx);
    for (const auto& r : tx.records) {
      Bytes bytes = mon_load(r.copy, r.size);
      for (std::uint64_t i = 0; i < r.count; ++i)
        untransfer_into(bytes, i * r.elem_size, r.plan, caller, tx);
      mon_store(r.original, bytes);
      event(EventKind::Copy, caller,
            "kind=restore from=" + std::to_string(r.copy) + " to=" + std::to_string(r.original) +
                " bytes=" + std::to_string(r.size));
      ++out_.stats.restores;
    }
    for (const auto& r : tx.records) {
      table_.domain_free(r.copy);
      event(EventKind::Free, d, "addr=" + std::to_string(r.copy));
    }
    table_.exit_domain();
    if (w->transient) {
      table_.destroy_transient(d);
      event(EventKind::Destroy, d, "");
    }
    return ret;
  }

  const ir::Program& p_;
  const std::vector<spec::SandboxUnit>& units_;
  const RunOptions& opt_;
  const instrument::InstrumentedProgram* ip_;
  bool oracle_;
  runtime::DomainTable table_;
  Outcome out_;

  std::map<std::string, UnitId> declared_;
  std::map<const ir::FunctionDef*, Layout> layouts_;
  std::vector<UnitId> logical_;
  std::size_t depth_ = 0;
  std::size_t decisions_ = 0;
  Address caller_frame_ = 0;
  ir::StmtRef loc_;

  // Oracle bookkeeping: object base -> (size, alloc site), and who touched it.
  std::map<Address, std::pair<std::uint64_t, ir::StmtRef>> objects_;
  std::map<Address, std::set<UnitId>> touchers_;
};

}  // namespace

Outcome run(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
            const RunOptions& options) {
  return Machine(p, units, options, nullptr, false).execute();
}

Outcome run(const instrument::InstrumentedProgram& ip, const RunOptions& options) {
  return Machine(ip.program, ip.units, options, &ip, false).execute();
}

OracleReport run_oracle(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                        const std::vector<std::uint64_t>& seeds, std::uint64_t step_budget) {
  OracleReport report;
  for (auto seed : seeds) {
    RunOptions opt;
    opt.seed = seed;
    opt.step_budget = step_budget;
    Machine m(p, units, opt, nullptr, true);
    Outcome o = m.execute();
    OracleRun r;
    r.seed = seed;
    r.status = o.status;
    r.message = o.message;
    r.decisions = o.decisions;
    // Touches before a panic still happened; keep them.
    r.crossing = m.crossing();
    for (const auto& [site, who] : r.crossing) report.crossing[site].insert(who.begin(), who.end());
    report.runs.push_back(std::move(r));
  }
  return report;
}

}  // namespace compart::interp
