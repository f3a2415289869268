#include "dimino/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dimino/dims.hpp"
#include "dimino/error.hpp"

namespace dimino {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "blob writer assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) fail(ErrorCode::kIo, "dataset blob truncated");
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  pos += 4;
  return v;
}

void put_real(std::string& out, double v, int float_bytes) {
  if (float_bytes == 8) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
  } else {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
  }
}

double get_real(const std::string& in, std::size_t& pos, int float_bytes) {
  if (pos + static_cast<std::size_t>(float_bytes) > in.size()) fail(ErrorCode::kIo, "dataset blob truncated");
  double v;
  if (float_bytes == 8) {
    std::memcpy(&v, in.data() + pos, 8);
  } else {
    float f;
    std::memcpy(&f, in.data() + pos, 4);
    v = f;
  }
  pos += static_cast<std::size_t>(float_bytes);
  return v;
}

json dim_json(const Dimension& d) { return json::array({d.mass(), d.length(), d.time()}); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "short write to " + p.string());
}

const char* stepper_name(SolverConfig::Stepper s) {
  return s == SolverConfig::Stepper::kRk4 ? "rk4" : "etdrk4";
}

json solver_json(const SolverConfig& c) {
  return {{"stepper", stepper_name(c.stepper)}, {"steps", c.steps}, {"cfl", c.cfl},
          {"dt_max", c.dt_max}, {"dealias_fraction", c.dealias_fraction},
          {"subtract_mean", c.subtract_mean}, {"reaction", c.reaction}};
}

SolverConfig solver_from_json(const json& j) {
  SolverConfig c;
  c.stepper = j.at("stepper").get<std::string>() == "rk4" ? SolverConfig::Stepper::kRk4
                                                          : SolverConfig::Stepper::kEtdrk4;
  c.steps = j.at("steps");
  c.cfl = j.at("cfl");
  c.dt_max = j.at("dt_max");
  c.dealias_fraction = j.at("dealias_fraction");
  c.subtract_mean = j.at("subtract_mean");
  c.reaction = j.at("reaction");
  return c;
}

}  // namespace

DimlessAudit audit_dimensionless(const std::vector<Sample>& samples) {
  DimlessAudit audit;
  if (samples.empty()) return audit;
  const auto& spec = dimless_spec(samples.front().system);
  std::vector<double> lo(spec.size(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(spec.size(), -std::numeric_limits<double>::infinity());
  for (const auto& s : samples) {
    const auto c = compute_dimensionless(spec, characteristic_scales_from_sample(s));
    for (std::size_t i = 0; i < c.size(); ++i) {
      lo[i] = std::min(lo[i], c[i]);
      hi[i] = std::max(hi[i], c[i]);
    }
  }
  for (std::size_t i = 0; i < spec.size(); ++i) {
    audit.numbers[spec.numbers[i].name] = {lo[i], hi[i], std::log10(hi[i] / lo[i])};
  }
  return audit;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds, int float_bytes) {
  if (float_bytes != 4 && float_bytes != 8) fail(ErrorCode::kInvalidArgument, "float width must be 4 or 8");
  const auto& info = system_info(ds.config.system);
  std::filesystem::create_directories(dir);

  json fields = json::array();
  for (const auto& name : info.input_fields) {
    fields.push_back({{"name", name}, {"role", "input"}, {"dim", dim_json(info.quantity(name).dim)}});
  }
  for (const auto& name : info.targets) {
    fields.push_back({{"name", name}, {"role", "target"}, {"dim", dim_json(info.quantity(name).dim)}});
  }
  json scalars = json::array();
  for (const auto& name : info.constants) {
    scalars.push_back({{"name", name}, {"dim", dim_json(info.quantity(name).dim)}});
  }
  scalars.push_back({{"name", "T"}, {"dim", dim_json(Dimension::of(0, 0, 1))}});

  json ranges = json::object();
  for (const auto& r : ds.config.ranges) ranges[r.name] = {r.lo, r.hi};

  json splits = json::object();
  json audits = json::object();
  for (const auto& [split, samples] : ds.splits) {
    std::string blob(kBlobMagic, 8);
    put_u32(blob, static_cast<std::uint32_t>(samples.size()));
    put_u32(blob, static_cast<std::uint32_t>(ds.config.grid.rank()));
    for (auto p : ds.config.grid.points) put_u32(blob, static_cast<std::uint32_t>(p));
    put_u32(blob, static_cast<std::uint32_t>(float_bytes));
    for (const auto& s : samples) {
      if (s.grid != ds.config.grid) fail(ErrorCode::kShapeMismatch, "sample grid differs from dataset grid");
      for (const auto& name : info.input_fields) {
        for (double v : s.input(name).values) put_real(blob, v, float_bytes);
      }
      for (const auto& name : info.targets) {
        for (double v : s.target(name).values) put_real(blob, v, float_bytes);
      }
      for (const auto& name : info.constants) put_real(blob, s.constant(name).value(), float_bytes);
      put_real(blob, s.horizon, float_bytes);
    }
    const std::string file = split + ".bin";
    write_file(dir / file, blob);
    splits[split] = {{"file", file}, {"count", samples.size()}};
    json audit = json::object();
    for (const auto& [name, e] : audit_dimensionless(samples).numbers) {
      audit[name] = {{"min", e.min}, {"max", e.max}, {"decades", e.decades}};
    }
    audits[split] = audit;
  }

  const auto& g = ds.config;
  json manifest = {
      {"format", std::string(kBlobMagic, 8)},
      {"system", info.name},
      {"dimless_spec", info.dimless.id},
      {"registry_version", registry().version},
      {"grid", {{"points", g.grid.points}, {"extent", g.grid.extent}, {"periodic", g.grid.periodic}}},
      {"horizon", g.horizon},
      {"seed", ds.seed},
      {"ranges", ranges},
      {"float_bytes", float_bytes},
      {"fields", fields},
      {"scalars", scalars},
      {"record_layout", "per sample: fields in order (grid-size arrays, row-major), then scalars in order"},
      {"splits", splits},
      {"dimless_audit", audits},
      {"generator",
       {{"initial_condition", "random Fourier series, modes 1..k_max, amplitude k^-decay, N(0,1) coefficients"},
        {"spectral_decay", g.spectral_decay},
        {"k_max", g.effective_k_max()},
        {"forcing_k_max", g.forcing_k_max},
        {"constants", "log-uniform over ranges"},
        {"max_retries", g.max_retries},
        {"solver", solver_json(g.solver)}}},
  };
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("bad manifest: ") + e.what());
  }
  Dataset ds;
  auto& g = ds.config;
  g.system = parse_system(manifest.at("system").get<std::string>());
  const auto& info = system_info(g.system);
  if (manifest.at("dimless_spec").get<std::string>() != info.dimless.id) {
    fail(ErrorCode::kSpecMismatch, "dataset was written against " +
                                       manifest.at("dimless_spec").get<std::string>() +
                                       ", registry has " + info.dimless.id);
  }
  g.grid.points = manifest.at("grid").at("points").get<std::vector<std::size_t>>();
  g.grid.extent = manifest.at("grid").at("extent").get<std::vector<double>>();
  g.grid.periodic = manifest.at("grid").at("periodic").get<std::vector<bool>>();
  g.grid.validate();
  g.horizon = manifest.at("horizon");
  ds.seed = manifest.at("seed");
  g.ranges.clear();
  for (const auto& [name, r] : manifest.at("ranges").items()) g.ranges.push_back({name, r.at(0), r.at(1)});
  const auto& gen = manifest.at("generator");
  g.spectral_decay = gen.at("spectral_decay");
  g.k_max = gen.at("k_max");
  g.forcing_k_max = gen.at("forcing_k_max");
  g.max_retries = gen.at("max_retries");
  g.solver = solver_from_json(gen.at("solver"));
  const int float_bytes = manifest.at("float_bytes");

  const std::size_t npts = g.grid.size();
  for (const auto& [split, meta] : manifest.at("splits").items()) {
    const std::string blob = read_file(dir / meta.at("file").get<std::string>());
    if (blob.size() < 8 || std::memcmp(blob.data(), kBlobMagic, 8) != 0) {
      fail(ErrorCode::kIo, "bad magic in " + meta.at("file").get<std::string>());
    }
    std::size_t pos = 8;
    const std::uint32_t count = get_u32(blob, pos);
    const std::uint32_t rank = get_u32(blob, pos);
    if (rank != static_cast<std::uint32_t>(g.grid.rank())) fail(ErrorCode::kShapeMismatch, "blob rank differs from manifest");
    for (std::uint32_t a = 0; a < rank; ++a) {
      if (get_u32(blob, pos) != g.grid.points[a]) fail(ErrorCode::kShapeMismatch, "blob grid differs from manifest");
    }
    if (static_cast<int>(get_u32(blob, pos)) != float_bytes) fail(ErrorCode::kIo, "blob float width differs from manifest");
    std::vector<Sample> samples(count);
    for (auto& s : samples) {
      s.system = g.system;
      s.grid = g.grid;
      auto read_field = [&](const std::string& name) {
        Field f{name, info.quantity(name).dim, std::vector<double>(npts)};
        for (auto& v : f.values) v = get_real(blob, pos, float_bytes);
        return f;
      };
      for (const auto& name : info.input_fields) s.inputs.push_back(read_field(name));
      for (const auto& name : info.targets) s.targets.push_back(read_field(name));
      for (const auto& name : info.constants) {
        s.constants.push_back({name, Quantity(get_real(blob, pos, float_bytes), info.quantity(name).dim)});
      }
      s.horizon = get_real(blob, pos, float_bytes);
    }
    if (pos != blob.size()) fail(ErrorCode::kIo, "trailing bytes in " + meta.at("file").get<std::string>());
    ds.splits[split] = std::move(samples);
  }
  return ds;
}

}  // namespace dimino
