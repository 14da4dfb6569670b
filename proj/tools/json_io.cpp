#include "json_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>
#include <sstream>

namespace dilkit::io {

namespace {

int array_depth(const json& j) {
  if (j.is_object()) return 100;
  if (!j.is_array()) return 0;
  int d = 0;
  for (const auto& e : j) d = std::max(d, array_depth(e));
  return d + 1;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  std::string s = fmt::format("{:.17g}", v);
  // keep floats distinguishable from integers so that parsing restores the type
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void emit(const json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' ');
  switch (j.type()) {
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool inline_array = array_depth(j) <= 2;
      out += inline_array ? "[" : "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += inline_array ? ", " : ",\n";
        first = false;
        if (!inline_array) out += pad;
        emit(e, indent + 2, out);
      }
      if (!inline_array) out += "\n" + std::string(static_cast<std::size_t>(indent), ' ');
      out += "]";
      return;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        emit(it.value(), indent + 2, out);
      }
      out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

std::string child(const std::string& ptr, const std::string& key) {
  std::string k;
  for (char c : key) {
    if (c == '~')
      k += "~0";
    else if (c == '/')
      k += "~1";
    else
      k += c;
  }
  return ptr + "/" + k;
}

std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw InputError(ptr, "expected an object");
}

void require_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw InputError(ptr, "expected an array");
}

// Rejects fields outside `allowed`.
void only(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
  require_object(j, ptr);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InputError(child(ptr, it.key()), "unknown field '" + it.key() + "'");
  }
}

const json& need(const json& j, const std::string& ptr, const char* key) {
  require_object(j, ptr);
  auto it = j.find(key);
  if (it == j.end()) throw InputError(child(ptr, key), std::string("missing field '") + key + "'");
  return *it;
}

long get_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw InputError(ptr, "expected an integer");
  return j.get<long>();
}

double get_double(const json& j, const std::string& ptr) {
  if (j.is_null()) return std::nan("");
  if (!j.is_number()) throw InputError(ptr, "expected a number");
  return j.get<double>();
}

std::string get_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw InputError(ptr, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw InputError(ptr, "expected true or false");
  return j.get<bool>();
}

cplx get_cplx(const json& j, const std::string& ptr) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InputError(ptr, "expected a complex number [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json_double(double v) { return json(v); }

IMatrix parse_imatrix(const json& j, const std::string& ptr, Eigen::Index rows, Eigen::Index cols) {
  require_array(j, ptr);
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw InputError(ptr, fmt::format("expected {} rows, got {}", rows, j.size()));
  IMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = child(ptr, static_cast<std::size_t>(r));
    const json& row = j[static_cast<std::size_t>(r)];
    require_array(row, rp);
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(rp, fmt::format("expected {} columns, got {}", cols, row.size()));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string cp = child(rp, static_cast<std::size_t>(c));
      const long v = get_int(row[static_cast<std::size_t>(c)], cp);
      if (v < 0) throw InputError(cp, "negative multiplicity");
      m(r, c) = static_cast<int>(v);
    }
  }
  return m;
}

Index parse_index(const json& j, const std::string& ptr) {
  require_array(j, ptr);
  Index n;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const long v = get_int(j[i], child(ptr, i));
    if (v < 0) throw InputError(child(ptr, i), "negative index");
    n.push_back(static_cast<int>(v));
  }
  return n;
}

// "(1,0,2)"
Index parse_index_key(const std::string& s, const std::string& ptr) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') throw InputError(ptr, "malformed index '" + s + "'");
  Index n;
  std::stringstream ss(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      n.push_back(v);
    } catch (const std::exception&) {
      throw InputError(ptr, "malformed index '" + s + "'");
    }
  }
  return n;
}

std::pair<Index, Index> parse_pair_key(const std::string& s, const std::string& ptr) {
  const auto plus = s.find(")+(");
  if (plus == std::string::npos) throw InputError(ptr, "malformed index pair '" + s + "'");
  return {parse_index_key(s.substr(0, plus + 1), ptr), parse_index_key(s.substr(plus + 2), ptr)};
}

Correspondence parse_member(const json& j, const std::string& ptr, const BlockAlgebra& b) {
  only(j, ptr, {"mult", "factors"});
  const int K = b.num_blocks();
  const IMatrix mult = parse_imatrix(need(j, ptr, "mult"), child(ptr, "mult"), K, K);
  const json& fj = need(j, ptr, "factors");
  const std::string fp = child(ptr, "factors");
  require_array(fj, fp);
  std::vector<Correspondence> factors;
  for (std::size_t i = 0; i < fj.size(); ++i)
    factors.emplace_back(b, b, parse_imatrix(fj[i], child(fp, i), K, K));
  Correspondence e = tensor_chain(factors, b);
  if (e.mult() != mult) throw InputError(child(ptr, "mult"), "multiplicities do not match the product of the factors");
  return e;
}

CorrVector parse_vector(const json& j, const std::string& ptr, const Correspondence& e) {
  require_array(j, ptr);
  const int K = e.left().num_blocks(), L = e.right().num_blocks();
  if (static_cast<int>(j.size()) != K * L) throw InputError(ptr, fmt::format("expected {} blocks", K * L));
  std::vector<CMatrix> blocks;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const std::size_t i = static_cast<std::size_t>(k * L + l);
      blocks.push_back(parse_matrix(j[i], child(ptr, i), e.dim(k, l),
                                    static_cast<Eigen::Index>(e.left().block_dim(k)) * e.right().block_dim(l)));
    }
  return CorrVector(e, std::move(blocks));
}

BilinearMap parse_bilinear(const json& j, const std::string& ptr, const Correspondence& source,
                           const Correspondence& target) {
  require_array(j, ptr);
  const int K = source.left().num_blocks(), L = source.right().num_blocks();
  if (static_cast<int>(j.size()) != K * L) throw InputError(ptr, fmt::format("expected {} blocks", K * L));
  std::vector<CMatrix> blocks;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const std::size_t i = static_cast<std::size_t>(k * L + l);
      blocks.push_back(parse_matrix(j[i], child(ptr, i), target.dim(k, l), source.dim(k, l)));
    }
  return BilinearMap(source, target, std::move(blocks));
}

std::vector<CMatrix> parse_kraus(const json& j, const std::string& ptr, const BlockAlgebra& dom,
                                 const BlockAlgebra& cod) {
  require_array(j, ptr);
  std::vector<CMatrix> kraus;
  for (std::size_t i = 0; i < j.size(); ++i)
    kraus.push_back(parse_matrix(j[i], child(ptr, i), dom.total_dim(), cod.total_dim()));
  return kraus;
}

json kraus_json(const std::vector<CMatrix>& kraus) {
  json k = json::array();
  for (const auto& c : kraus) k.push_back(to_json(c));
  return k;
}

json claim_value(const ClaimValue& v) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::vector<double>>) {
          json a = json::array();
          for (double d : x) a.push_back(to_json_double(d));
          return a;
        } else {
          return json(x);
        }
      },
      v);
}

ClaimValue parse_claim_value(const json& j, const std::string& ptr) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<long>();
  if (j.is_number() || j.is_null()) return get_double(j, ptr);
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(get_double(j[i], child(ptr, i)));
    return v;
  }
  throw InputError(ptr, "unsupported claim value");
}

// Library errors raised while assembling a parsed object point at that object.
template <class F>
auto located(const std::string& ptr, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw InputError(ptr, e.what());
  }
}

}  // namespace

std::string write(const json& j) {
  std::string out;
  emit(j, 0, out);
  out += "\n";
  return out;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("", fmt::format("malformed JSON at byte {}", e.byte));
  }
}

json document(const std::string& schema) {
  json j = json::object();
  j["schema"] = "dilkit." + schema;
  j["version"] = kSchemaVersion;
  return j;
}

void expect_document(const json& j, const std::string& schema) {
  require_object(j, "");
  const std::string s = get_string(need(j, "", "schema"), "/schema");
  if (s != "dilkit." + schema) throw InputError("/schema", "expected schema 'dilkit." + schema + "', got '" + s + "'");
  if (get_int(need(j, "", "version"), "/version") != kSchemaVersion)
    throw InputError("/version", fmt::format("unsupported version, expected {}", kSchemaVersion));
}

json to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(json::array({to_json_double(m(r, c).real()), to_json_double(m(r, c).imag())}));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const IMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const BlockAlgebra& a) { return json{{"blocks", a.block_dims()}}; }

json to_json(const Index& n) { return json(n); }

json to_json(const CPMap& t, bool top_level) {
  json j = top_level ? document("cpmap") : json::object();
  j["algebra"] = to_json(t.domain());
  if (t.codomain() != t.domain()) j["codomain"] = to_json(t.codomain());
  j["kraus"] = kraus_json(t.kraus());
  return j;
}

json to_json(const Correspondence& e) {
  json factors = json::array();
  for (const auto& atom : e.chain()) {
    if (atom->left != e.left() || atom->right != e.left())
      throw Error(ErrorKind::InvalidInput, "only chains over a single algebra can be serialised");
    factors.push_back(to_json(atom->mult));
  }
  return json{{"mult", to_json(e.mult())}, {"factors", factors}};
}

json to_json(const CorrVector& x) {
  json blocks = json::array();
  const int K = x.parent().left().num_blocks(), L = x.parent().right().num_blocks();
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) blocks.push_back(to_json(x.block(k, l)));
  return blocks;
}

json to_json(const BilinearMap& m) {
  json blocks = json::array();
  const int K = m.source().left().num_blocks(), L = m.source().right().num_blocks();
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) blocks.push_back(to_json(m.block(k, l)));
  return blocks;
}

json to_json(const FlipData& fd) {
  json j = document("flips");
  j["algebra"] = to_json(fd.spaces.front().left());
  json spaces = json::array();
  for (const auto& e : fd.spaces) spaces.push_back(to_json(e));
  j["spaces"] = spaces;
  json flips = json::object();
  for (const auto& [key, f] : fd.flips) flips[fmt::format("({},{})", key.first, key.second)] = to_json(f);
  j["flips"] = flips;
  if (!fd.vectors.empty()) {
    json v = json::array();
    for (const auto& x : fd.vectors) v.push_back(to_json(x));
    j["vectors"] = v;
  }
  return j;
}

json to_json(const TruncatedSystem& sys) {
  json j = document("system");
  j["kind"] = system_kind_name(sys.kind);
  j["cap"] = sys.cap.cap;
  j["algebra"] = to_json(sys.algebra);
  json members = json::object();
  for (const auto& [n, e] : sys.members) members[index_string(n)] = to_json(e);
  j["members"] = members;
  json structure = json::object();
  for (const auto& [mn, v] : sys.structure) structure[index_string(mn.first) + "+" + index_string(mn.second)] = to_json(v);
  j["structure"] = structure;
  if (sys.unit) {
    json unit = json::object();
    for (const auto& [n, x] : *sys.unit) unit[index_string(n)] = to_json(x);
    j["unit"] = unit;
  }
  return j;
}

json to_json(const DilationTriple& t) {
  json j = document("triple");
  j["algebra"] = to_json(t.ambient);
  json gens = json::array();
  for (const auto& g : t.generators) gens.push_back(kraus_json(g.kraus()));
  j["generators"] = gens;
  j["p"] = to_json(t.p);
  if (t.interior) j["interior"] = to_json(*t.interior);
  if (t.depth) j["depth"] = *t.depth;
  return j;
}

json to_json(const RowContraction& rc) {
  json j = document("row-contraction");
  j["c"] = kraus_json(rc.c);
  return j;
}

json to_json(const ExampleReport& r) {
  json j = document("report");
  j["id"] = r.id;
  json header = json::object();
  for (const auto& [k, v] : r.header) header[k] = v;
  j["header"] = header;
  json claims = json::array();
  for (const auto& c : r.claims) {
    claims.push_back(json{{"id", c.id},
                          {"expected", claim_value(c.expected)},
                          {"computed", claim_value(c.computed)},
                          {"residual", to_json_double(c.residual)},
                          {"pass", c.pass}});
  }
  j["claims"] = claims;
  j["conclusion"] = r.conclusion;
  j["verdict"] = verdict_name(r.verdict());
  return j;
}

CMatrix parse_matrix(const json& j, const std::string& ptr, Eigen::Index rows, Eigen::Index cols) {
  require_array(j, ptr);
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (rows >= 0 && r != rows) throw InputError(ptr, fmt::format("expected {} rows, got {}", rows, r));
  Eigen::Index c = cols;
  if (c < 0) {
    if (r == 0) throw InputError(ptr, "cannot infer the column count of an empty matrix");
    c = j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  }
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const std::string rp = child(ptr, static_cast<std::size_t>(i));
    const json& row = j[static_cast<std::size_t>(i)];
    require_array(row, rp);
    if (static_cast<Eigen::Index>(row.size()) != c)
      throw InputError(rp, fmt::format("expected {} columns, got {}", c, row.size()));
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = get_cplx(row[static_cast<std::size_t>(k)], child(rp, static_cast<std::size_t>(k)));
  }
  if (!m.allFinite()) throw InputError(ptr, "non-finite entry");
  return m;
}

BlockAlgebra parse_algebra(const json& j, const std::string& ptr) {
  only(j, ptr, {"blocks"});
  const json& bj = need(j, ptr, "blocks");
  const std::string bp = child(ptr, "blocks");
  require_array(bj, bp);
  if (bj.empty()) throw InputError(bp, "an algebra needs at least one block");
  std::vector<int> dims;
  for (std::size_t i = 0; i < bj.size(); ++i) {
    const long n = get_int(bj[i], child(bp, i));
    if (n < 1) throw InputError(child(bp, i), "block dimensions must be positive");
    dims.push_back(static_cast<int>(n));
  }
  return BlockAlgebra(dims);
}

CPMap parse_cpmap(const json& j, const std::string& ptr, bool top_level) {
  if (top_level) {
    expect_document(j, "cpmap");
    only(j, ptr, {"schema", "version", "algebra", "codomain", "kraus"});
  } else {
    only(j, ptr, {"algebra", "codomain", "kraus"});
  }
  const BlockAlgebra dom = parse_algebra(need(j, ptr, "algebra"), child(ptr, "algebra"));
  const BlockAlgebra cod = j.contains("codomain") ? parse_algebra(j["codomain"], child(ptr, "codomain")) : dom;
  std::vector<CMatrix> kraus = parse_kraus(need(j, ptr, "kraus"), child(ptr, "kraus"), dom, cod);
  return located(child(ptr, "kraus"), [&] { return CPMap(dom, cod, std::move(kraus)); });
}

FlipData parse_flips(const json& j) {
  expect_document(j, "flips");
  only(j, "", {"schema", "version", "algebra", "spaces", "flips", "vectors"});
  const BlockAlgebra b = parse_algebra(need(j, "", "algebra"), "/algebra");
  FlipData fd;
  const json& sj = need(j, "", "spaces");
  require_array(sj, "/spaces");
  if (sj.empty()) throw InputError("/spaces", "at least one space is required");
  for (std::size_t i = 0; i < sj.size(); ++i) fd.spaces.push_back(parse_member(sj[i], child("/spaces", i), b));
  const json& fj = need(j, "", "flips");
  require_object(fj, "/flips");
  const int d = fd.d();
  for (auto it = fj.begin(); it != fj.end(); ++it) {
    const std::string fp = child("/flips", it.key());
    const Index key = parse_index_key(it.key(), fp);
    if (key.size() != 2 || key[0] < 1 || key[0] >= key[1] || key[1] > d)
      throw InputError(fp, "flip keys are (j,i) with 1 <= j < i <= d");
    const Correspondence& ej = fd.spaces[static_cast<std::size_t>(key[0] - 1)];
    const Correspondence& ei = fd.spaces[static_cast<std::size_t>(key[1] - 1)];
    fd.flips.emplace(std::make_pair(key[0], key[1]), parse_bilinear(it.value(), fp, tensor(ei, ej), tensor(ej, ei)));
  }
  for (int jj = 1; jj <= d; ++jj)
    for (int i = jj + 1; i <= d; ++i)
      if (!fd.flips.count({jj, i})) throw InputError(child("/flips", fmt::format("({},{})", jj, i)), "missing flip");
  if (j.contains("vectors")) {
    const json& vj = j["vectors"];
    require_array(vj, "/vectors");
    if (static_cast<int>(vj.size()) != d) throw InputError("/vectors", "one vector per space is required");
    for (std::size_t i = 0; i < vj.size(); ++i)
      fd.vectors.push_back(parse_vector(vj[i], child("/vectors", i), fd.spaces[i]));
  }
  return fd;
}

TruncatedSystem parse_system(const json& j) {
  expect_document(j, "system");
  only(j, "", {"schema", "version", "kind", "cap", "algebra", "members", "structure", "unit"});
  TruncatedSystem sys;
  const std::string kind = get_string(need(j, "", "kind"), "/kind");
  if (kind == "SUB")
    sys.kind = SystemKind::Sub;
  else if (kind == "SUPER")
    sys.kind = SystemKind::Super;
  else if (kind == "PRODUCT")
    sys.kind = SystemKind::Product;
  else
    throw InputError("/kind", "kind must be SUB, SUPER or PRODUCT");
  const Index cap = parse_index(need(j, "", "cap"), "/cap");
  if (cap.empty()) throw InputError("/cap", "the cap needs at least one coordinate");
  sys.cap = GridCap(cap);
  sys.algebra = parse_algebra(need(j, "", "algebra"), "/algebra");

  const json& mj = need(j, "", "members");
  require_object(mj, "/members");
  for (auto it = mj.begin(); it != mj.end(); ++it) {
    const std::string mp = child("/members", it.key());
    const Index n = parse_index_key(it.key(), mp);
    if (static_cast<int>(n.size()) != sys.d() || !sys.cap.contains(n)) throw InputError(mp, "index outside the cap");
    sys.members.emplace(n, parse_member(it.value(), mp, sys.algebra));
  }
  for (const Index& n : sys.cap.indices())
    if (!sys.members.count(n)) throw InputError(child("/members", index_string(n)), "missing member");

  const json& st = need(j, "", "structure");
  require_object(st, "/structure");
  for (auto it = st.begin(); it != st.end(); ++it) {
    const std::string sp = child("/structure", it.key());
    const auto [m, n] = parse_pair_key(it.key(), sp);
    if (static_cast<int>(m.size()) != sys.d() || static_cast<int>(n.size()) != sys.d() || !sys.cap.contains(add(m, n)))
      throw InputError(sp, "index pair outside the cap");
    const Correspondence& whole = sys.members.at(add(m, n));
    const Correspondence split = tensor(sys.members.at(m), sys.members.at(n));
    sys.structure.emplace(std::make_pair(m, n), sys.kind == SystemKind::Sub ? parse_bilinear(it.value(), sp, whole, split)
                                                                            : parse_bilinear(it.value(), sp, split, whole));
  }
  if (j.contains("unit")) {
    const json& uj = j["unit"];
    require_object(uj, "/unit");
    std::map<Index, CorrVector> unit;
    for (auto it = uj.begin(); it != uj.end(); ++it) {
      const std::string up = child("/unit", it.key());
      const Index n = parse_index_key(it.key(), up);
      auto mem = sys.members.find(n);
      if (mem == sys.members.end()) throw InputError(up, "index outside the cap");
      unit.emplace(n, parse_vector(it.value(), up, mem->second));
    }
    sys.unit = std::move(unit);
  }
  return sys;
}

DilationTriple parse_triple(const json& j) {
  expect_document(j, "triple");
  only(j, "", {"schema", "version", "algebra", "generators", "p", "interior", "depth"});
  DilationTriple t;
  t.ambient = parse_algebra(need(j, "", "algebra"), "/algebra");
  const json& gj = need(j, "", "generators");
  require_array(gj, "/generators");
  if (gj.empty()) throw InputError("/generators", "at least one generator is required");
  for (std::size_t i = 0; i < gj.size(); ++i) {
    const std::string gp = child("/generators", i);
    std::vector<CMatrix> kraus = parse_kraus(gj[i], gp, t.ambient, t.ambient);
    t.generators.push_back(located(gp, [&] { return CPMap(t.ambient, t.ambient, std::move(kraus)); }));
  }
  const int n = t.ambient.total_dim();
  t.p = parse_matrix(need(j, "", "p"), "/p", n, n);
  if (j.contains("interior")) t.interior = parse_matrix(j["interior"], "/interior", n, n);
  if (j.contains("depth")) {
    const long depth = get_int(j["depth"], "/depth");
    if (depth < 0) throw InputError("/depth", "depth must be nonnegative");
    t.depth = static_cast<int>(depth);
  }
  return t;
}

RowContraction parse_row_contraction(const json& j, const Tolerance& tol) {
  expect_document(j, "row-contraction");
  only(j, "", {"schema", "version", "c"});
  const json& cj = need(j, "", "c");
  require_array(cj, "/c");
  if (cj.empty()) throw InputError("/c", "at least one operator is required");
  std::vector<CMatrix> c;
  for (std::size_t i = 0; i < cj.size(); ++i) {
    const Eigen::Index g = i == 0 ? -1 : c.front().rows();
    c.push_back(parse_matrix(cj[i], child("/c", i), g, g));
    if (c.back().rows() != c.back().cols()) throw InputError(child("/c", i), "operators must be square");
  }
  return located("/c", [&] { return RowContraction::make(std::move(c), tol); });
}

ExampleReport parse_report(const json& j) {
  expect_document(j, "report");
  only(j, "", {"schema", "version", "id", "header", "claims", "conclusion", "verdict"});
  ExampleReport r;
  r.id = get_string(need(j, "", "id"), "/id");
  const json& hj = need(j, "", "header");
  require_object(hj, "/header");
  for (auto it = hj.begin(); it != hj.end(); ++it)
    r.header.emplace_back(it.key(), get_string(it.value(), child("/header", it.key())));
  const json& cj = need(j, "", "claims");
  require_array(cj, "/claims");
  for (std::size_t i = 0; i < cj.size(); ++i) {
    const std::string cp = child("/claims", i);
    only(cj[i], cp, {"id", "expected", "computed", "residual", "pass"});
    Claim c;
    c.id = get_string(need(cj[i], cp, "id"), child(cp, "id"));
    c.expected = parse_claim_value(need(cj[i], cp, "expected"), child(cp, "expected"));
    c.computed = parse_claim_value(need(cj[i], cp, "computed"), child(cp, "computed"));
    c.residual = get_double(need(cj[i], cp, "residual"), child(cp, "residual"));
    c.pass = get_bool(need(cj[i], cp, "pass"), child(cp, "pass"));
    r.claims.push_back(std::move(c));
  }
  r.conclusion = get_string(need(j, "", "conclusion"), "/conclusion");
  const std::string verdict = get_string(need(j, "", "verdict"), "/verdict");
  r.inconclusive = verdict == verdict_name(Verdict::Inconclusive);
  if (verdict != verdict_name(r.verdict())) throw InputError("/verdict", "verdict does not match the claims");
  return r;
}

GridCap parse_cap_string(const std::string& s, int d) {
  std::vector<int> values;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      values.push_back(v);
    } catch (const std::exception&) {
      throw InputError("", "malformed --cap '" + s + "'");
    }
  }
  if (values.size() == 1) return GridCap::uniform(d, values.front());
  if (static_cast<int>(values.size()) != d)
    throw InputError("", fmt::format("--cap needs 1 or {} entries", d));
  return GridCap(values);
}

}  // namespace dilkit::io
