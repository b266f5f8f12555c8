// Simulated in-process isolation substrate.
//
// Memory is one flat integer address space carved into disjoint regions, one
// stack and one heap per domain. Every guest access is checked against the
// access matrix below before it touches the backing bytes:
//
//   context \ owner   root  monitor  sandbox  shared
//   monitor            yes    yes      yes      yes
//   root               yes    no       yes      yes
//   sandbox(u)         no     no       self     if u participates
//   shared             no     no       no       self
//
// Regions of destroyed domains stay mapped to their old owner so that later
// accesses report a stale domain; address ranges are never reused.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "compart/spec.hpp"

namespace compart::runtime {

using DomainId = std::uint32_t;
using Address = std::uint64_t;

inline constexpr DomainId kRootDomain = 0;
inline constexpr DomainId kMonitorDomain = 1;
inline constexpr DomainId kFirstSandbox = 2;
inline constexpr DomainId kFirstShared = 0x10000;

/// Low addresses reserved for the syscall interposer. Never mapped.
inline constexpr Address kInterposerEnd = 512;
/// First mapped address; everything below is unmapped.
inline constexpr Address kFirstMapped = 4096;

enum class DomainKind { Root, Monitor, Sandbox, Shared };
std::string_view domain_kind_name(DomainKind k);

struct Region {
  Address base = 0;
  std::uint64_t size = 0;
  bool contains(Address a) const { return a >= base && a - base < size; }
  Address end() const { return base + size; }
};

struct Domain {
  DomainId id = kRootDomain;
  DomainKind kind = DomainKind::Root;
  UnitId unit = kRootUnit;        // Sandbox
  std::uint32_t instance = 0;     // Sandbox: 1, 2, ... per unit
  bool transient = false;         // Sandbox
  std::set<UnitId> participants;  // Shared
  Region stack;
  Region heap;
  bool destroyed = false;
  Address stack_top = 0;  // next free stack byte

  std::string label() const;
};

enum class ViolationKind { MemoryAccess, SyscallDenied, StaleDomain, Visibility };
std::string_view violation_kind_name(ViolationKind k);

struct Violation {
  ViolationKind kind = ViolationKind::MemoryAccess;
  DomainId context = kRootDomain;
  std::optional<Address> address;
  std::string syscall;
  std::string location;  // statement reference, filled in by the interpreter
  std::string detail;

  std::string to_string() const;
};

/// Thrown by API calls that are themselves forbidden (e.g. creating a
/// sandbox from sandboxed code, entering a destroyed domain).
class ViolationError : public std::runtime_error {
 public:
  explicit ViolationError(Violation v);
  const Violation& violation() const { return v_; }

 private:
  Violation v_;
};

/// Misuse of the runtime API or resource exhaustion.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuntimeConfig {
  std::uint64_t monitor_size = 4096;
  std::uint64_t stack_size = 64 * 1024;
  std::uint64_t heap_size = 1024 * 1024;
  std::uint64_t shared_heap_size = 1024 * 1024;
};

struct UnitPolicy {
  std::string name;
  bool transient = false;
  std::set<std::string> syscalls;
};

std::map<UnitId, UnitPolicy> unit_policies(const std::vector<spec::SandboxUnit>& units);

using SyscallArg = std::variant<std::int64_t, std::string>;

/// Built-in deny rules. Returns the reason when a call matches one.
std::optional<std::string> syscall_deny_reason(const std::string& name,
                                               const std::vector<SyscallArg>& args);

class DomainTable {
 public:
  explicit DomainTable(std::map<UnitId, UnitPolicy> units = {}, RuntimeConfig config = {});

  const RuntimeConfig& config() const { return config_; }
  const std::map<UnitId, UnitPolicy>& units() const { return units_; }

  // -- lifecycle
  DomainId create_sandbox_domain(UnitId unit, bool transient);
  DomainId create_shared_domain(std::uint32_t static_id, const std::set<UnitId>& participants);
  void enter_domain(DomainId id);
  void exit_domain();
  void destroy_transient(DomainId id);

  DomainId current() const { return contexts_.back(); }
  const std::vector<DomainId>& context_stack() const { return contexts_; }
  const Domain& domain(DomainId id) const;
  bool has_domain(DomainId id) const { return domains_.count(id) != 0; }
  std::vector<const Domain*> domains() const;
  std::optional<DomainId> persistent_instance(UnitId unit) const;

  // -- access control
  bool may_access(DomainId context, DomainId owner) const;
  std::optional<DomainId> owner_of(Address a) const;
  std::optional<Violation> check_access(DomainId context, Address a, bool is_write,
                                        std::uint64_t size = 1) const;
  std::optional<Violation> filter_syscall(DomainId context, const std::string& name,
                                          const std::vector<SyscallArg>& args) const;

  // -- heap
  Address domain_alloc(DomainId id, std::uint64_t size);
  void domain_free(Address a);
  std::optional<std::uint64_t> allocation_size(Address a) const;
  std::map<DomainId, std::uint64_t> allocations_per_domain() const { return alloc_counts_; }

  // -- stack frames (zeroed on push)
  Address push_frame(DomainId id, std::uint64_t size);
  void pop_frame(DomainId id, Address frame);

  // -- raw memory, no checks
  void read(Address a, std::span<std::uint8_t> out) const;
  void write(Address a, std::span<const std::uint8_t> in);
  std::int64_t load_cell(Address a) const;
  void store_cell(Address a, std::int64_t v);
  void copy(Address dst, Address src, std::uint64_t n);
  void fill_zero(Address a, std::uint64_t n);

  /// Total mapped address space, [kFirstMapped, end).
  Address address_space_end() const { return next_base_; }

 private:
  Region reserve(std::uint64_t size);
  Domain& make_domain(DomainId id, DomainKind kind, std::uint64_t stack, std::uint64_t heap);
  std::vector<std::uint8_t>* storage_for(Address a, Address* base);
  const std::vector<std::uint8_t>* storage_for(Address a, Address* base) const;

  RuntimeConfig config_;
  std::map<UnitId, UnitPolicy> units_;
  std::map<DomainId, Domain> domains_;
  std::vector<DomainId> contexts_;
  std::map<UnitId, std::uint32_t> instance_counter_;
  std::map<UnitId, DomainId> persistent_;
  DomainId next_sandbox_ = kFirstSandbox;
  Address next_base_ = kFirstMapped;

  // Region base -> (owner, region size). Covers stacks and heaps.
  std::map<Address, std::pair<DomainId, std::uint64_t>> regions_;
  // Lazily materialized backing bytes per region base.
  std::map<Address, std::vector<std::uint8_t>> storage_;

  // Allocator metadata, held outside every guest-visible region.
  std::map<DomainId, std::map<Address, std::uint64_t>> free_lists_;
  std::map<Address, std::pair<DomainId, std::uint64_t>> live_allocs_;
  std::map<DomainId, std::uint64_t> alloc_counts_;
};

}  // namespace compart::runtime
