#include <sstream>

#include "compart/ir.hpp"

namespace compart::ir {
namespace {

std::string relative(const std::string& qualified, const std::string& prefix) {
  if (qualified.starts_with(prefix + "::")) return qualified.substr(prefix.size() + 2);
  return qualified;
}

std::string format_statement(const Statement& s) {
  std::string out;
  switch (s.kind) {
    case Statement::Kind::Assign: out = s.dst->to_string() + " = " + s.rvalue.to_string(); break;
    case Statement::Kind::Call: {
      out = s.dst->to_string() + " = call " + s.callee + "(";
      for (std::size_t i = 0; i < s.args.size(); ++i)
        out += (i ? ", " : "") + s.args[i].to_string();
      out += ")";
      break;
    }
    case Statement::Kind::Alloc:
      out = s.dst->to_string() + " = alloc " + s.container + "<" + s.elem.to_string() + ">, " +
            std::to_string(s.length);
      if (s.shared_domain) out += " in shared " + std::to_string(*s.shared_domain);
      break;
    case Statement::Kind::Syscall: {
      if (s.dst) out = s.dst->to_string() + " = ";
      out += "syscall " + s.syscall + "(";
      for (std::size_t i = 0; i < s.sys_args.size(); ++i)
        out += (i ? ", " : "") + s.sys_args[i].to_string();
      out += ")";
      break;
    }
    case Statement::Kind::Branch: out = "branch " + s.targets[0] + ", " + s.targets[1]; break;
    case Statement::Kind::Goto: out = "goto " + s.targets[0]; break;
    case Statement::Kind::Return: out = "return"; break;
    case Statement::Kind::RawStore:
      out = "rawstore " + s.raw.to_string() + ", " + s.src.to_string();
      break;
    case Statement::Kind::RawLoad: out = s.dst->to_string() + " = rawload " + s.raw.to_string(); break;
  }
  return out + ";";
}

void format_function(std::ostringstream& os, const FunctionDef& f, const std::string& indent) {
  std::string prefix = f.owner_type ? *f.owner_type : f.crate;
  os << indent << (f.visibility == Visibility::Public ? "pub " : "") << "fn "
     << relative(f.path, prefix) << "(";
  for (std::uint32_t i = 1; i <= f.param_count; ++i)
    os << (i > 1 ? ", " : "") << "v" << i << ": " << f.locals[i].to_string();
  os << ") -> " << f.locals[0].to_string() << " {\n";
  for (std::size_t i = f.param_count + 1; i < f.locals.size(); ++i)
    os << indent << "  let v" << i << ": " << f.locals[i].to_string() << ";\n";
  for (const auto& b : f.blocks) {
    os << indent << b.label << ":\n";
    for (const auto& s : b.statements) os << indent << "  " << format_statement(s) << "\n";
  }
  os << indent << "}\n";
}

}  // namespace

std::string format_program(const Program& p) {
  std::ostringstream os;
  os << "entry " << p.entry << ";\n";
  for (const auto& c : p.crates) {
    os << "\ncrate " << c.name << " {\n";
    bool first = true;
    for (const auto& a : c.aggregates) {
      if (!first) os << "\n";
      first = false;
      os << "  struct " << relative(a.name, c.name) << " {\n";
      for (const auto& [name, t] : a.fields) os << "    " << name << ": " << t.to_string() << ",\n";
      os << "  }\n";
    }
    std::size_t i = 0;
    while (i < c.functions.size()) {
      if (!first) os << "\n";
      first = false;
      const auto& f = c.functions[i];
      if (!f.owner_type) {
        format_function(os, f, "  ");
        ++i;
        continue;
      }
      // Consecutive methods of one type share an impl block.
      os << "  impl " << relative(*f.owner_type, c.name) << " {\n";
      std::size_t j = i;
      while (j < c.functions.size() && c.functions[j].owner_type == f.owner_type) {
        if (j > i) os << "\n";
        format_function(os, c.functions[j], "    ");
        ++j;
      }
      os << "  }\n";
      i = j;
    }
    os << "}\n";
  }
  return os.str();
}

}  // namespace compart::ir
