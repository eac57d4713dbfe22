#include "eqlab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "eqlab/errors.hpp"

namespace eqlab {

std::string format_decimal(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("csv row " + std::to_string(row), "bad number '" + s + "'");
  return v;
}

// Rows after the header, each with D + 2 fields; returns D.
std::size_t read_rows(const std::string& text, std::vector<std::vector<std::string>>& rows) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv", "missing header");
  const auto head = split(line);
  if (head.size() < 2 || head[head.size() - 2] != "label" || head.back() != "weight")
    throw ConfigError("csv header", "expected x1..xd,label,weight");
  const std::size_t D = head.size() - 2;
  for (std::size_t i = 0; i < D; ++i)
    if (head[i] != "x" + std::to_string(i + 1)) throw ConfigError("csv header", "column " + head[i]);
  std::size_t r = 1;
  while (std::getline(in, line)) {
    ++r;
    if (line.empty() || line == "\r") continue;
    auto f = split(line);
    if (f.size() != D + 2) throw ConfigError("csv row " + std::to_string(r), "field count");
    rows.push_back(std::move(f));
  }
  return D;
}

std::string header(std::size_t D) {
  std::string h;
  for (std::size_t i = 0; i < D; ++i) h += "x" + std::to_string(i + 1) + ",";
  return h + "label,weight\n";
}

// little-endian primitives
void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw ConfigError("ensemble cache", "truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
std::uint64_t get_u64(std::istream& is) { return get_le(is, 8); }
int get_u8(std::istream& is) { return static_cast<int>(get_le(is, 1)); }

void put_big(std::ostream& os, const BigInt& z) {
  os.put(static_cast<char>(sgn(z) < 0 ? 1 : 0));
  std::size_t count = 0;
  std::string bytes((mpz_sizeinbase(z.get_mpz_t(), 2) + 7) / 8 + 1, '\0');
  mpz_export(bytes.data(), &count, -1, 1, 0, 0, z.get_mpz_t());
  put_u32(os, static_cast<std::uint32_t>(count));
  os.write(bytes.data(), static_cast<std::streamsize>(count));
}
BigInt get_big(std::istream& is) {
  const int neg = get_u8(is);
  const std::uint32_t count = get_u32(is);
  std::string bytes(count, '\0');
  if (count > 0 && !is.read(bytes.data(), count)) throw ConfigError("ensemble cache", "truncated");
  BigInt z;
  mpz_import(z.get_mpz_t(), count, -1, 1, 0, 0, bytes.data());
  if (neg) z = -z;
  return z;
}

}  // namespace

std::string ensemble_to_csv(const WalkEnsemble& ens) {
  const std::size_t d = ens.dim();
  std::string out = header(d);
  for (const auto& a : ens.atoms) {
    const auto x = a.x.to_double();
    for (double v : x) out += format_decimal(v) + ",";
    out += std::to_string(a.label) + "," + format_decimal(to_double(a.weight)) + "\n";
  }
  return out;
}

WalkEnsemble ensemble_from_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  const std::size_t d = read_rows(text, rows);
  WalkEnsemble ens;
  ens.mode = EnsembleMode::montecarlo;
  ens.samples = rows.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<Rational> c(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double v = parse_double(rows[r][i], r + 2);
      if (!(v >= 0 && v < 1)) throw ConfigError("csv row " + std::to_string(r + 2), "coordinate outside [0,1)");
      c[i] = Rational(v);
    }
    WalkAtom a;
    a.x = TorusPoint::exact(c);
    a.label = std::stoi(rows[r][d]);
    a.weight = Rational(parse_double(rows[r][d + 1], r + 2));
    ens.atoms.push_back(std::move(a));
  }
  return ens;
}

std::string measure_to_csv(const ScaledMeasure& m) {
  std::string out = header(m.D());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < m.D(); ++k) out += format_decimal(m.point(i)[k]) + ",";
    out += "0," + format_decimal(m.weights[i]) + "\n";
  }
  return out;
}

ScaledMeasure measure_from_csv(const std::string& text, const AlgebraSpace& space, double delta) {
  std::vector<std::vector<std::string>> rows;
  const std::size_t D = read_rows(text, rows);
  if (D != space.D) throw DimensionMismatch("measure_from_csv: column count");
  ScaledMeasure m;
  m.space = space;
  m.delta = delta;
  std::vector<double> p(D);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < D; ++i) p[i] = parse_double(rows[r][i], r + 2);
    m.push(p.data(), parse_double(rows[r][D + 1], r + 2));
  }
  return m;
}

void write_ensemble(std::ostream& os, const WalkEnsemble& ens) {
  os.write("EQLE", 4);
  put_u32(os, kEnsembleCacheVersion);
  os.put(static_cast<char>(ens.mode == EnsembleMode::exact ? 0 : 1));
  put_u32(os, static_cast<std::uint32_t>(ens.dim()));
  put_u32(os, ens.n);
  put_u64(os, ens.seed);
  put_u64(os, ens.samples);
  put_u32(os, ens.precision_bits);
  put_u64(os, ens.atoms.size());
  for (const auto& a : ens.atoms) {
    const bool exact = a.x.is_exact();
    os.put(static_cast<char>(exact ? 0 : 1));
    for (const auto& z : a.x.numerators()) put_big(os, z);
    if (exact) {
      put_big(os, a.x.denominator());
    } else {
      put_u32(os, a.x.precision_bits());
      put_big(os, a.x.error_ulps());
    }
    put_u32(os, static_cast<std::uint32_t>(a.label));
    put_big(os, a.weight.get_num());
    put_big(os, a.weight.get_den());
    os.put(static_cast<char>(a.product ? 1 : 0));
    if (a.product) {
      put_u32(os, static_cast<std::uint32_t>(a.product->dim()));
      for (const auto& z : a.product->entries()) put_big(os, z);
    }
  }
}

WalkEnsemble read_ensemble(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "EQLE") throw ConfigError("ensemble cache", "bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kEnsembleCacheVersion)
    throw ConfigError("ensemble cache", "unsupported version " + std::to_string(version));
  WalkEnsemble ens;
  ens.mode = get_u8(is) == 0 ? EnsembleMode::exact : EnsembleMode::montecarlo;
  const std::uint32_t d = get_u32(is);
  ens.n = get_u32(is);
  ens.seed = get_u64(is);
  ens.samples = get_u64(is);
  ens.precision_bits = get_u32(is);
  const std::uint64_t count = get_u64(is);
  ens.atoms.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    WalkAtom a;
    const int kind = get_u8(is);
    std::vector<BigInt> num(d);
    for (auto& z : num) z = get_big(is);
    if (kind == 0) {
      RationalVector v;
      v.numerators = std::move(num);
      v.denominator = get_big(is);
      a.x = TorusPoint::exact(v);
    } else {
      const std::uint32_t bits = get_u32(is);
      BigInt err = get_big(is);
      a.x = TorusPoint::dyadic(std::move(num), bits, err);
    }
    a.label = static_cast<int>(get_u32(is));
    BigInt p = get_big(is), q = get_big(is);
    a.weight = Rational(p, q);
    a.weight.canonicalize();
    if (get_u8(is)) {
      const std::uint32_t pd = get_u32(is);
      IntMatrix g(pd);
      for (std::size_t r = 0; r < pd; ++r)
        for (std::size_t c = 0; c < pd; ++c) g(r, c) = get_big(is);
      a.product = std::move(g);
    }
    ens.atoms.push_back(std::move(a));
  }
  return ens;
}

void save_ensemble(const std::string& path, const WalkEnsemble& ens) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("output", "cannot open " + path);
  write_ensemble(os, ens);
}

WalkEnsemble load_ensemble(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("input", "cannot open " + path);
  return read_ensemble(is);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace eqlab
