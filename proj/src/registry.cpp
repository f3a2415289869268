#include <charconv>
#include <sstream>

#include "dimino/dims.hpp"
#include "dimino/error.hpp"

namespace dimino {

namespace {

// Columns: role name M L T | target name | number name root factor... |
// similar exact|groups factor...
constexpr std::string_view kRegistryText = R"(# dimino dimensionless-number registry
version 1

system advection1d 1
  field     u      0 0 0
  constant  beta   0 1 -1
  length    L      0 1 0
  time      T      0 0 1
  target    u
  number    beta_T_over_L  1  beta:1 T:1 L:-1
  similar   exact  beta:-1 T:1

system burgers1d 1
  field     u      0 1 -1
  constant  nu     0 2 -1
  length    L      0 1 0
  time      T      0 0 1
  target    u
  number    Re     1  u:1 L:1 nu:-1
  similar   exact  u:-1 nu:-1 T:1

system diffreact2d 2
  field     u      0 1 -1
  field     v      0 1 -1
  constant  Du     0 2 -1
  constant  Dv     0 2 -1
  constant  k      0 1 -1
  length    L      0 1 0
  time      T      0 0 1
  target    u
  target    v
  number    Du_over_Dv  1  Du:1 Dv:-1
  number    Pe_u        1  u:1 L:1 Du:-1
  number    Pe_v        1  v:1 L:1 Dv:-1
  similar   groups u:-1 v:-1 Du:-1 Dv:-1 k:-1 T:1

system ns-vorticity2d 2
  field     omega  0 0 -1
  field     f      0 0 -2
  constant  nu     0 2 -1
  length    L      0 1 0
  time      T      0 0 1
  target    omega
  number    Re     1  omega:1 L:2 nu:-1
  number    St     1  T:1 omega:1
  number    Fr     2  omega:2 f:-1
  similar   exact  omega:-1 f:-2 nu:-1 T:1
)";

int parse_int(const std::string& token, int line) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail(ErrorCode::kInvalidArgument,
         "registry line " + std::to_string(line) + ": bad integer '" + token + "'");
  }
  return value;
}

std::pair<std::string, int> parse_factor(const std::string& token, int line) {
  const auto colon = token.find(':');
  if (colon == std::string::npos) {
    fail(ErrorCode::kInvalidArgument,
         "registry line " + std::to_string(line) + ": expected name:exponent, got '" + token + "'");
  }
  return {token.substr(0, colon), parse_int(token.substr(colon + 1), line)};
}

void check_system(const SystemInfo& info) {
  for (const auto& number : info.dimless.numbers) {
    Dimension dim;
    for (const auto& [name, exponent] : number.factors) {
      dim = dim * info.quantity(name).dim.pow(exponent);
    }
    if (!dim.is_dimensionless()) {
      fail(ErrorCode::kNonDimensionlessMonomial, "registry: " + info.name + "/" + number.name +
                                                     " has dimension " + dim.to_string());
    }
  }
  for (const auto& t : info.targets) info.quantity(t);
  for (const auto& [name, e] : info.rule.exponents) info.quantity(name);
}

}  // namespace

std::string_view registry_text() { return kRegistryText; }

Registry parse_registry(std::string_view text) {
  Registry reg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  SystemInfo* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::vector<std::string> tok;
    for (std::string t; line >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const auto& key = tok[0];
    auto need = [&](std::size_t n) {
      if (tok.size() < n) {
        fail(ErrorCode::kInvalidArgument, "registry line " + std::to_string(line_no) + ": too few columns");
      }
    };
    if (key == "version") {
      need(2);
      reg.version = parse_int(tok[1], line_no);
      continue;
    }
    if (key == "system") {
      need(3);
      SystemInfo info;
      info.id = parse_system(tok[1]);
      info.name = tok[1];
      info.rank = parse_int(tok[2], line_no);
      info.dimless.system = info.id;
      reg.systems.push_back(std::move(info));
      current = &reg.systems.back();
      continue;
    }
    if (current == nullptr) {
      fail(ErrorCode::kInvalidArgument, "registry line " + std::to_string(line_no) + ": entry outside a system block");
    }
    if (key == "field" || key == "constant" || key == "length" || key == "time") {
      need(5);
      QuantityDecl decl;
      decl.name = tok[1];
      decl.dim = Dimension::of(parse_int(tok[2], line_no), parse_int(tok[3], line_no),
                               parse_int(tok[4], line_no));
      if (key == "field") {
        decl.role = QuantityDecl::Role::kField;
        current->input_fields.push_back(decl.name);
      } else if (key == "constant") {
        decl.role = QuantityDecl::Role::kConstant;
        current->constants.push_back(decl.name);
      } else if (key == "length") {
        decl.role = QuantityDecl::Role::kLength;
      } else {
        decl.role = QuantityDecl::Role::kTime;
      }
      current->quantities.push_back(decl);
    } else if (key == "target") {
      need(2);
      current->targets.push_back(tok[1]);
    } else if (key == "number") {
      need(4);
      Monomial m;
      m.name = tok[1];
      m.root = parse_int(tok[2], line_no);
      if (m.root < 1) fail(ErrorCode::kInvalidArgument, "registry: root must be >= 1");
      for (std::size_t i = 3; i < tok.size(); ++i) m.factors.push_back(parse_factor(tok[i], line_no));
      current->dimless.numbers.push_back(std::move(m));
    } else if (key == "similar") {
      need(3);
      current->rule.exact = tok[1] == "exact";
      for (std::size_t i = 2; i < tok.size(); ++i) current->rule.exponents.push_back(parse_factor(tok[i], line_no));
    } else {
      fail(ErrorCode::kInvalidArgument, "registry line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  for (auto& info : reg.systems) {
    info.dimless.id = info.name + "/v" + std::to_string(reg.version);
    check_system(info);
  }
  return reg;
}

const Registry& registry() {
  static const Registry reg = parse_registry(kRegistryText);
  return reg;
}

const SystemInfo& system_info(SystemId id) {
  for (const auto& s : registry().systems) {
    if (s.id == id) return s;
  }
  fail(ErrorCode::kUnknownSystemRule, "system not registered: " + std::string(system_name(id)));
}

const DimlessSpec& dimless_spec(SystemId id) { return system_info(id).dimless; }

}  // namespace dimino
