#include "compart/runtime.hpp"

#include <algorithm>
#include <cstring>
#include <regex>

namespace compart::runtime {

std::string_view domain_kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::Root: return "root";
    case DomainKind::Monitor: return "monitor";
    case DomainKind::Sandbox: return "sandbox";
    case DomainKind::Shared: return "shared";
  }
  return "?";
}

std::string Domain::label() const {
  switch (kind) {
    case DomainKind::Root: return "root";
    case DomainKind::Monitor: return "monitor";
    case DomainKind::Sandbox: return "sandbox(u" + std::to_string(unit) + "#" + std::to_string(instance) + ")";
    case DomainKind::Shared: {
      std::string s = "shared(" + std::to_string(id) + ":";
      bool first = true;
      for (auto u : participants) {
        s += (first ? "" : ",") + unit_label(u);
        first = false;
      }
      return s + ")";
    }
  }
  return "?";
}

std::string_view violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::MemoryAccess: return "memory-access";
    case ViolationKind::SyscallDenied: return "syscall-denied";
    case ViolationKind::StaleDomain: return "stale-domain";
    case ViolationKind::Visibility: return "visibility";
  }
  return "?";
}

std::string Violation::to_string() const {
  std::string s = std::string(violation_kind_name(kind)) + " in domain " + std::to_string(context);
  if (address) s += " at address " + std::to_string(*address);
  if (!syscall.empty()) s += " syscall " + syscall;
  if (!location.empty()) s += " (" + location + ")";
  if (!detail.empty()) s += ": " + detail;
  return s;
}

ViolationError::ViolationError(Violation v) : std::runtime_error(v.to_string()), v_(std::move(v)) {}

std::map<UnitId, UnitPolicy> unit_policies(const std::vector<spec::SandboxUnit>& units) {
  std::map<UnitId, UnitPolicy> out;
  for (const auto& u : units)
    out[u.id] = UnitPolicy{u.decl.path, u.decl.transient,
                           {u.decl.syscalls.begin(), u.decl.syscalls.end()}};
  return out;
}

namespace {

std::optional<std::int64_t> int_arg(const std::vector<SyscallArg>& args, std::size_t i) {
  if (i >= args.size()) return std::nullopt;
  if (const auto* v = std::get_if<std::int64_t>(&args[i])) return *v;
  return std::nullopt;
}

std::optional<std::string> str_arg(const std::vector<SyscallArg>& args, std::size_t i) {
  if (i >= args.size()) return std::nullopt;
  if (const auto* v = std::get_if<std::string>(&args[i])) return *v;
  return std::nullopt;
}

bool hits_interposer(std::optional<std::int64_t> addr, std::optional<std::int64_t> len) {
  if (!addr) return false;
  std::int64_t n = std::max<std::int64_t>(len.value_or(1), 1);
  return *addr < static_cast<std::int64_t>(kInterposerEnd) && *addr + n > 0;
}

}  // namespace

std::optional<std::string> syscall_deny_reason(const std::string& name,
                                               const std::vector<SyscallArg>& args) {
  if (name.rfind("pkey_", 0) == 0) return "protection-key manipulation";
  if (name == "open" || name == "openat") {
    static const std::regex self_mem(R"(^/proc/(self|thread-self|\d+)(/task/\d+)?/mem$)");
    auto path = str_arg(args, name == "open" ? 0 : 1);
    if (path && std::regex_match(*path, self_mem)) return "open of process memory file " + *path;
  }
  if (name == "read" && hits_interposer(int_arg(args, 1), int_arg(args, 2)))
    return "write into the interposer region";
  if (name == "mmap" || name == "mprotect") {
    if (hits_interposer(int_arg(args, 0), int_arg(args, 1)))
      return "mapping over the interposer region";
    auto prot = int_arg(args, 2).value_or(0);
    if ((prot & 2) && (prot & 4)) return "writable and executable mapping";
  }
  return std::nullopt;
}

DomainTable::DomainTable(std::map<UnitId, UnitPolicy> units, RuntimeConfig config)
    : config_(config), units_(std::move(units)) {
  make_domain(kMonitorDomain, DomainKind::Monitor, 0, config_.monitor_size);
  make_domain(kRootDomain, DomainKind::Root, config_.stack_size, config_.heap_size);
  contexts_.push_back(kRootDomain);
}

Region DomainTable::reserve(std::uint64_t size) {
  Region r{next_base_, size};
  next_base_ += size;
  return r;
}

Domain& DomainTable::make_domain(DomainId id, DomainKind kind, std::uint64_t stack,
                                 std::uint64_t heap) {
  Domain d;
  d.id = id;
  d.kind = kind;
  d.stack = reserve(stack);
  d.heap = reserve(heap);
  d.stack_top = d.stack.base;
  if (stack) regions_[d.stack.base] = {id, stack};
  if (heap) {
    regions_[d.heap.base] = {id, heap};
    free_lists_[id][d.heap.base] = heap;
  }
  return domains_[id] = std::move(d);
}

DomainId DomainTable::create_sandbox_domain(UnitId unit, bool transient) {
  const Domain& requester = domain(current());
  if (requester.kind == DomainKind::Sandbox || requester.kind == DomainKind::Shared)
    throw ViolationError(Violation{ViolationKind::Visibility, current(), std::nullopt, {}, {},
                                   "sandboxed code cannot create domains"});
  if (!units_.count(unit)) throw RuntimeError("create for undeclared unit " + unit_label(unit));
  if (!transient) {
    auto it = persistent_.find(unit);
    if (it != persistent_.end()) return it->second;
  }
  DomainId id = next_sandbox_++;
  Domain& d = make_domain(id, DomainKind::Sandbox, config_.stack_size, config_.heap_size);
  d.unit = unit;
  d.transient = transient;
  d.instance = ++instance_counter_[unit];
  if (!transient) persistent_[unit] = id;
  return id;
}

DomainId DomainTable::create_shared_domain(std::uint32_t static_id,
                                           const std::set<UnitId>& participants) {
  if (static_id < kFirstShared) throw RuntimeError("shared domain id below the shared base");
  auto it = domains_.find(static_id);
  if (it != domains_.end()) {
    if (it->second.participants != participants)
      throw RuntimeError("shared domain " + std::to_string(static_id) + " redeclared");
    return static_id;
  }
  Domain& d = make_domain(static_id, DomainKind::Shared, 0, config_.shared_heap_size);
  d.participants = participants;
  return static_id;
}

void DomainTable::enter_domain(DomainId id) {
  auto it = domains_.find(id);
  if (it == domains_.end()) throw RuntimeError("enter of unknown domain " + std::to_string(id));
  if (it->second.destroyed)
    throw ViolationError(Violation{ViolationKind::StaleDomain, current(), std::nullopt, {}, {},
                                   "enter of destroyed domain " + it->second.label()});
  contexts_.push_back(id);
}

void DomainTable::exit_domain() {
  if (contexts_.size() <= 1) throw RuntimeError("exit with empty context stack");
  contexts_.pop_back();
}

void DomainTable::destroy_transient(DomainId id) {
  auto it = domains_.find(id);
  if (it == domains_.end()) throw RuntimeError("destroy of unknown domain " + std::to_string(id));
  Domain& d = it->second;
  if (d.kind != DomainKind::Sandbox || !d.transient)
    throw RuntimeError("only transient sandbox instances can be destroyed");
  if (std::find(contexts_.begin(), contexts_.end(), id) != contexts_.end())
    throw RuntimeError("destroy of " + d.label() + " while it is entered");
  d.destroyed = true;
  storage_.erase(d.stack.base);
  storage_.erase(d.heap.base);
  for (auto a = live_allocs_.begin(); a != live_allocs_.end();)
    a = a->second.first == id ? live_allocs_.erase(a) : std::next(a);
  free_lists_.erase(id);
}

const Domain& DomainTable::domain(DomainId id) const {
  auto it = domains_.find(id);
  if (it == domains_.end()) throw RuntimeError("unknown domain " + std::to_string(id));
  return it->second;
}

std::vector<const Domain*> DomainTable::domains() const {
  std::vector<const Domain*> out;
  for (const auto& [_, d] : domains_) out.push_back(&d);
  return out;
}

std::optional<DomainId> DomainTable::persistent_instance(UnitId unit) const {
  auto it = persistent_.find(unit);
  if (it == persistent_.end()) return std::nullopt;
  return it->second;
}

bool DomainTable::may_access(DomainId context, DomainId owner) const {
  const Domain& c = domain(context);
  const Domain& o = domain(owner);
  if (c.kind == DomainKind::Monitor) return true;
  if (o.kind == DomainKind::Monitor) return false;
  switch (c.kind) {
    case DomainKind::Root: return true;
    case DomainKind::Sandbox:
      return owner == context || (o.kind == DomainKind::Shared && o.participants.count(c.unit));
    case DomainKind::Shared: return owner == context;
    case DomainKind::Monitor: return true;
  }
  return false;
}

std::optional<DomainId> DomainTable::owner_of(Address a) const {
  auto it = regions_.upper_bound(a);
  if (it == regions_.begin()) return std::nullopt;
  --it;
  if (a - it->first >= it->second.second) return std::nullopt;
  return it->second.first;
}

std::optional<Violation> DomainTable::check_access(DomainId context, Address a, bool is_write,
                                                   std::uint64_t size) const {
  auto fail = [&](ViolationKind k, std::string detail) {
    return Violation{k, context, a, {}, {}, std::move(detail)};
  };
  const char* verb = is_write ? "write" : "read";
  auto owner = owner_of(a);
  if (!owner) return fail(ViolationKind::MemoryAccess, std::string(verb) + " of unmapped address");
  if (size > 1) {
    auto last = owner_of(a + size - 1);
    if (last != owner)
      return fail(ViolationKind::MemoryAccess, std::string(verb) + " straddles a region boundary");
  }
  const Domain& o = domain(*owner);
  if (o.destroyed)
    return fail(ViolationKind::StaleDomain, std::string(verb) + " of destroyed " + o.label());
  if (!may_access(context, *owner))
    return fail(ViolationKind::MemoryAccess,
                domain(context).label() + " may not " + verb + " memory of " + o.label());
  return std::nullopt;
}

std::optional<Violation> DomainTable::filter_syscall(DomainId context, const std::string& name,
                                                     const std::vector<SyscallArg>& args) const {
  const Domain& c = domain(context);
  if (c.kind == DomainKind::Monitor) return std::nullopt;
  auto deny = [&](std::string detail) {
    return Violation{ViolationKind::SyscallDenied, context, std::nullopt, name, {},
                     std::move(detail)};
  };
  if (auto reason = syscall_deny_reason(name, args)) return deny(*reason);
  if (c.kind == DomainKind::Root) return std::nullopt;
  if (c.kind == DomainKind::Sandbox) {
    auto it = units_.find(c.unit);
    if (it != units_.end() && it->second.syscalls.count(name)) return std::nullopt;
  }
  return deny("not on the allow-list of " + c.label());
}

Address DomainTable::domain_alloc(DomainId id, std::uint64_t size) {
  if (size == 0) throw RuntimeError("allocation of size 0");
  const Domain& d = domain(id);
  if (d.destroyed) throw RuntimeError("allocation in destroyed " + d.label());
  std::uint64_t need = (size + 7) / 8 * 8;
  auto& fl = free_lists_[id];
  for (auto it = fl.begin(); it != fl.end(); ++it) {
    if (it->second < need) continue;
    Address a = it->first;
    std::uint64_t rest = it->second - need;
    fl.erase(it);
    if (rest) fl[a + need] = rest;
    live_allocs_[a] = {id, need};
    ++alloc_counts_[id];
    fill_zero(a, need);
    return a;
  }
  throw RuntimeError("heap of " + d.label() + " exhausted");
}

void DomainTable::domain_free(Address a) {
  auto it = live_allocs_.find(a);
  if (it == live_allocs_.end()) throw RuntimeError("free of unknown address " + std::to_string(a));
  auto [id, size] = it->second;
  live_allocs_.erase(it);
  auto& fl = free_lists_[id];
  auto next = fl.emplace(a, size).first;
  // Coalesce with neighbours.
  auto after = std::next(next);
  if (after != fl.end() && next->first + next->second == after->first) {
    next->second += after->second;
    fl.erase(after);
  }
  if (next != fl.begin()) {
    auto before = std::prev(next);
    if (before->first + before->second == next->first) {
      before->second += next->second;
      fl.erase(next);
    }
  }
}

std::optional<std::uint64_t> DomainTable::allocation_size(Address a) const {
  auto it = live_allocs_.find(a);
  if (it == live_allocs_.end()) return std::nullopt;
  return it->second.second;
}

Address DomainTable::push_frame(DomainId id, std::uint64_t size) {
  Domain& d = domains_.at(id);
  std::uint64_t need = std::max<std::uint64_t>((size + 7) / 8 * 8, 8);
  if (d.stack_top + need > d.stack.end()) throw RuntimeError("stack overflow in " + d.label());
  Address frame = d.stack_top;
  d.stack_top += need;
  fill_zero(frame, need);
  return frame;
}

void DomainTable::pop_frame(DomainId id, Address frame) {
  Domain& d = domains_.at(id);
  if (frame < d.stack.base || frame > d.stack_top) throw RuntimeError("pop of unknown frame");
  d.stack_top = frame;
}

std::vector<std::uint8_t>* DomainTable::storage_for(Address a, Address* base) {
  auto it = regions_.upper_bound(a);
  if (it == regions_.begin()) throw RuntimeError("raw access to unmapped address");
  --it;
  if (a - it->first >= it->second.second) throw RuntimeError("raw access to unmapped address");
  *base = it->first;
  auto& bytes = storage_[it->first];
  if (bytes.empty()) bytes.assign(it->second.second, 0);
  return &bytes;
}

const std::vector<std::uint8_t>* DomainTable::storage_for(Address a, Address* base) const {
  auto it = regions_.upper_bound(a);
  if (it == regions_.begin()) throw RuntimeError("raw access to unmapped address");
  --it;
  if (a - it->first >= it->second.second) throw RuntimeError("raw access to unmapped address");
  *base = it->first;
  auto s = storage_.find(it->first);
  return s == storage_.end() ? nullptr : &s->second;
}

void DomainTable::read(Address a, std::span<std::uint8_t> out) const {
  for (std::size_t i = 0; i < out.size();) {
    Address base = 0;
    const auto* bytes = storage_for(a + i, &base);
    auto end = regions_.at(base).second + base;
    std::size_t n = std::min<std::uint64_t>(out.size() - i, end - (a + i));
    if (bytes) std::memcpy(out.data() + i, bytes->data() + (a + i - base), n);
    else std::memset(out.data() + i, 0, n);
    i += n;
  }
}

void DomainTable::write(Address a, std::span<const std::uint8_t> in) {
  for (std::size_t i = 0; i < in.size();) {
    Address base = 0;
    auto* bytes = storage_for(a + i, &base);
    auto end = regions_.at(base).second + base;
    std::size_t n = std::min<std::uint64_t>(in.size() - i, end - (a + i));
    std::memcpy(bytes->data() + (a + i - base), in.data() + i, n);
    i += n;
  }
}

std::int64_t DomainTable::load_cell(Address a) const {
  std::int64_t v = 0;
  read(a, {reinterpret_cast<std::uint8_t*>(&v), sizeof v});
  return v;
}

void DomainTable::store_cell(Address a, std::int64_t v) {
  write(a, {reinterpret_cast<const std::uint8_t*>(&v), sizeof v});
}

void DomainTable::copy(Address dst, Address src, std::uint64_t n) {
  std::vector<std::uint8_t> buf(n);
  read(src, buf);
  write(dst, buf);
}

void DomainTable::fill_zero(Address a, std::uint64_t n) {
  // Untouched regions read as zero already; avoid materializing them.
  Address base = 0;
  if (!static_cast<const DomainTable*>(this)->storage_for(a, &base)) {
    auto end = regions_.at(base).second + base;
    if (a + n <= end) return;
  }
  std::vector<std::uint8_t> zeros(n, 0);
  write(a, zeros);
}

}  // namespace compart::runtime
