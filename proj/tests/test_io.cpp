#include <doctest.h>

#include <sstream>

#include "regmse/csv.hpp"
#include "regmse/error.hpp"
#include "regmse/register.hpp"
#include "regmse/schema.hpp"

using namespace regmse;

namespace {

const char* kSchema = R"(
[outcome]
labels = low;mid;high

[covariate.age]
kind = categorical
levels = young;adult;old
reference = adult

[covariate.sex]
kind = binary
levels = M;F

[covariate.area]
kind = categorical
levels = n;s
role = external_domain
)";

const char* kRegister =
    "unit_id,age,sex,area,sampled,pi,outcome\n"
    "a,young,M,n,1,0.5,1\n"
    "b,adult,F,s,0,0.5,\n"
    "c,old,F,n,1,0.5,3\n"
    "d,adult,M,s,1,0.5,2\n";

CovariateSchema schema() {
  std::istringstream in(kSchema);
  return read_schema(in, "test.cfg");
}

Register reg() {
  std::istringstream in(kRegister);
  return read_register(in, "reg.csv", schema());
}

}  // namespace

TEST_CASE("split_record handles quotes and escapes") {
  const auto f = csv::split_record(R"(a,"b,c","say ""hi""",,"")");
  REQUIRE(f.size() == 5);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b,c");
  CHECK(f[2] == R"(say "hi")");
  CHECK(f[3].empty());
  CHECK(f[4].empty());
}

TEST_CASE("csv errors name the physical line") {
  std::istringstream in("x,y\n1,2\n\n3\n");
  try {
    (void)csv::read(in, "t.csv");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("t.csv:4") != std::string::npos);
  }
}

TEST_CASE("csv write then read round-trips quoted fields") {
  std::ostringstream out;
  csv::write(out, {"k", "v"}, {{"[29,39]", "x\"y"}, {"plain", ""}});
  std::istringstream in(out.str());
  const auto t = csv::read(in, "rt");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "[29,39]");
  CHECK(t.rows[0][1] == "x\"y");
  CHECK(t.column("v") == 1);
  CHECK(t.column("missing") == -1);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 113719.0, 6.02214076e23}) {
    CHECK(csv::parse_double(csv::format_double(v), "v") == v);
  }
  CHECK_THROWS_AS((void)csv::parse_double("1,5", "cell"), InputError);
  CHECK_THROWS_AS((void)csv::parse_int("2.0", "cell"), InputError);
}

TEST_CASE("schema parses levels with brackets and separators") {
  std::istringstream in("[outcome]\nlabels = a;b\n[covariate.age]\nkind = categorical\n"
                        "levels = (,28];[29,39];[70,)\n");
  const auto s = read_schema(in, "s");
  const auto* age = s.find("age");
  REQUIRE(age != nullptr);
  REQUIRE(age->levels.size() == 3);
  CHECK(age->levels[0] == "(,28]");
  CHECK(age->levels[2] == "[70,)");
  CHECK(s.design_width() == 3);
}

TEST_CASE("schema write then read keeps the schema") {
  const auto s = schema();
  std::ostringstream out;
  write_schema(out, s);
  std::istringstream in(out.str());
  const auto back = read_schema(in, "rt");
  CHECK(back.category_labels() == s.category_labels());
  REQUIRE(back.covariates().size() == s.covariates().size());
  CHECK(back.find("age")->reference == 1);
  CHECK(back.find("area")->role == CovariateRole::external_domain);
}

TEST_CASE("schema validation rejects bad declarations") {
  const auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_schema(in, "bad");
  };
  CHECK_THROWS_AS(parse("[covariate.a]\nkind = binary\nlevels = x;y\n"), InputError);
  CHECK_THROWS_AS(parse("[outcome]\nlabels = a;b\n[covariate.a]\nkind = binary\nlevels = x;y;z\n"), InputError);
  CHECK_THROWS_AS(parse("[outcome]\nlabels = a;b\n[covariate.a]\nkind = ordinal\nlevels = x;y\n"), InputError);
  CHECK_THROWS_AS(parse("[outcome]\nlabels = a;b\n[covariate.a]\nlevels = x;y\nreference = z\n"), InputError);
  CHECK_THROWS_AS(parse("[outcome]\nlabels = a;b\n[covariate.a]\nlevels = x;x\n"), InputError);
  CHECK_THROWS_AS(parse("[outcome]\nlabels = a\n"), InputError);
}

TEST_CASE("design columns follow declaration order with the reference dropped") {
  const auto r = reg();
  const auto d = build_design_matrix(r, schema());
  REQUIRE(d.cols() == 4);
  CHECK(d.column_names[0] == "(Intercept)");
  CHECK(d.column_names[1] == "age::young");
  CHECK(d.column_names[2] == "age::old");
  CHECK(d.column_names[3] == "sex");
  // unit c: old, F
  CHECK(d.x(2, 0) == 1.0);
  CHECK(d.x(2, 1) == 0.0);
  CHECK(d.x(2, 2) == 1.0);
  CHECK(d.x(2, 3) == 1.0);
  // unit b: adult is the reference
  CHECK(d.x.row(1).sum() == 2.0);
}

TEST_CASE("unknown level error names the unit and column") {
  std::istringstream in("unit_id,age,sex,area,sampled,pi,outcome\nz9,ancient,M,n,1,0.5,1\nz8,adult,F,n,1,0.5,2\n");
  const auto r = read_register(in, "r.csv", schema());
  try {
    (void)build_design_matrix(r, schema());
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("z9") != std::string::npos);
    CHECK(msg.find("age") != std::string::npos);
    CHECK(msg.find("ancient") != std::string::npos);
  }
}

TEST_CASE("register reader rejects malformed rows") {
  const auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_register(in, "r.csv", schema());
  };
  const std::string head = "unit_id,age,sex,area,sampled,pi,outcome\n";
  CHECK_THROWS_AS(read(head), InputError);
  CHECK_THROWS_AS(read(head + "a,young,M,n,1,0.5,\n"), InputError);
  CHECK_THROWS_AS(read(head + "a,young,M,n,0,0.5,2\n"), InputError);
  CHECK_THROWS_AS(read(head + "a,young,M,n,1,0.5,4\n"), InputError);
  CHECK_THROWS_AS(read(head + "a,young,M,n,2,0.5,1\n"), InputError);
  CHECK_THROWS_AS(read("unit_id,age,area,sampled,pi,outcome\na,young,n,1,0.5,1\n"), InputError);
  try {
    (void)read(head + "a,young,M,n,1,0.5,1\nb,young,M,n,1,abc,1\n");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("r.csv:3") != std::string::npos);
  }
}

TEST_CASE("domains and totals") {
  const auto r = reg();
  const auto s = schema();
  const auto full = full_register_domain(r);
  CHECK(full.size() == 4.0);
  CHECK(full.kind == DomainKind::full_register);

  const auto north = domain_vector(r, s, "area", "n");
  CHECK(north.kind == DomainKind::external);
  CHECK(north.membership(0) == 1.0);
  CHECK(north.membership(1) == 0.0);
  CHECK(north.size() == 2.0);
  CHECK(north.warning.empty());

  const auto sex = domain_vector(r, s, "sex", "F");
  CHECK(sex.kind == DomainKind::internal);

  // a declared level nobody has
  std::istringstream in2("unit_id,age,sex,area,sampled,pi,outcome\na,young,M,n,1,0.5,1\n");
  const auto r2 = read_register(in2, "r2", s);
  const auto empty = domain_vector(r2, s, "area", "s");
  CHECK(empty.size() == 0.0);
  CHECK_FALSE(empty.warning.empty());

  CHECK_THROWS_AS((void)domain_vector(r, s, "nope", "x"), InputError);

  const auto parts = domain_partition(r, s, "area");
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() + parts[1].size() == 4.0);

  const auto y = observed_one_hot(r, 3);
  CHECK(y.row(1).sum() == 0.0);
  const auto totals = population_total(full, y);
  CHECK(totals(0) == 1.0);
  CHECK(totals(1) == 1.0);
  CHECK(totals(2) == 1.0);
  CHECK(population_total(north, y).sum() == 2.0);
}

TEST_CASE("register write then read is identical") {
  const auto r = reg();
  std::ostringstream out;
  write_register(out, r);
  std::istringstream in(out.str());
  const auto back = read_register(in, "rt", schema());
  CHECK(back.unit_ids == r.unit_ids);
  CHECK(back.sampled == r.sampled);
  CHECK(back.inclusion == r.inclusion);
  CHECK(back.outcome == r.outcome);
  std::ostringstream again;
  write_register(again, back);
  CHECK(again.str() == out.str());
}
