#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace switcheff;
using testsupport::temp_dir;
using testsupport::write_file;

TEST_CASE("load_csv parses a small mixed file, order preserved") {
  const auto dir = temp_dir();
  const std::string path = write_file(dir / "small.csv",
                                      "id,T,R,S,Y,X1\n"
                                      "a,1,f,1,2.5,0.1\n"
                                      "b,1,f,0,1.25,-0.5\n"
                                      "c,1,p,NA,0.5,2.0\n"
                                      "d,0,l,,3.5,1.5\n"
                                      "e,0,h,NA,-1.0,0.0\n");
  ColumnSchema schema = ColumnSchema::canonical({"X1"});
  const TrialDataset data = load_csv(path, schema);
  REQUIRE(data.size() == 5);
  CHECK(data.subjects()[0].id == "a");
  CHECK(data.subjects()[0].switched == 1);
  CHECK(data.subjects()[1].switched == 0);
  CHECK_FALSE(data.subjects()[2].switched.has_value());
  CHECK(data.subjects()[3].arm == Arm::fixed_low);
  CHECK(data.subjects()[3].outcome == 3.5);
  CHECK(data.subjects()[4].covariates[0] == 0.0);
}

TEST_CASE("load_csv rejects invariant violations with the row number") {
  const auto dir = temp_dir();
  ColumnSchema schema = ColumnSchema::canonical({"X1"});

  SECTION("fixed-trial subject on the flexible arm") {
    const std::string path = write_file(dir / "badarm.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,1,1,0\n"
                                        "b,0,f,,1,0\n"
                                        "c,0,l,,1,0\n");
    CHECK_THROWS_WITH(load_csv(path, schema),
                      Catch::Matchers::ContainsSubstring("row 2"));
  }
  SECTION("missing switch indicator on the flexible arm") {
    const std::string path = write_file(dir / "noswitch.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,,1,0\n"
                                        "b,0,l,,1,0\n");
    CHECK_THROWS_AS(load_csv(path, schema), DataError);
  }
  SECTION("S present off the flexible arm") {
    const std::string path = write_file(dir / "extras.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,1,1,0\n"
                                        "b,0,l,1,1,0\n");
    CHECK_THROWS_WITH(load_csv(path, schema), Catch::Matchers::ContainsSubstring("row 2"));
  }
  SECTION("bad S token") {
    const std::string path = write_file(dir / "bads.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,maybe,1,0\n"
                                        "b,0,l,,1,0\n");
    CHECK_THROWS_AS(load_csv(path, schema), DataError);
  }
  SECTION("missing column") {
    const std::string path = write_file(dir / "nocol.csv",
                                        "id,T,R,S,Y\n"
                                        "a,1,f,1,1\n");
    CHECK_THROWS_WITH(load_csv(path, schema), Catch::Matchers::ContainsSubstring("X1"));
  }
  SECTION("unparseable numeric") {
    const std::string path = write_file(dir / "badnum.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,1,one,0\n"
                                        "b,0,l,,1,0\n");
    CHECK_THROWS_WITH(load_csv(path, schema), Catch::Matchers::ContainsSubstring("'one'"));
  }
  SECTION("duplicate subject id") {
    const std::string path = write_file(dir / "dup.csv",
                                        "id,T,R,S,Y,X1\n"
                                        "a,1,f,1,1,0\n"
                                        "a,0,l,,1,0\n");
    CHECK_THROWS_WITH(load_csv(path, schema), Catch::Matchers::ContainsSubstring("duplicate"));
  }
}

TEST_CASE("write_csv then load_csv is the identity on generated data") {
  const TrialDataset data = generate_trial_data(DGPSetting::numbered(2), 77);
  REQUIRE(data.size() == 500);
  const auto dir = temp_dir();
  const std::string path = (dir / "roundtrip.csv").string();
  write_csv(data, path);
  const TrialDataset back = load_csv(path, ColumnSchema::canonical(data.covariate_names()));
  REQUIRE(back.size() == data.size());
  REQUIRE(back.covariate_names() == data.covariate_names());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Subject& a = data.subjects()[i];
    const Subject& b = back.subjects()[i];
    CHECK(a.id == b.id);
    CHECK(a.trial == b.trial);
    CHECK(a.arm == b.arm);
    CHECK(a.switched == b.switched);
    CHECK(a.outcome == b.outcome);  // bit-exact via %.17g
    REQUIRE(a.covariates.size() == b.covariates.size());
    for (std::size_t j = 0; j < a.covariates.size(); ++j) {
      CHECK(a.covariates[j] == b.covariates[j]);
    }
  }
}

TEST_CASE("subset filters by (T, R, S) and preserves order") {
  const TrialDataset data = generate_trial_data(DGPSetting::numbered(1), 5);

  SECTION("flexible-arm predicate") {
    const auto flex = subset(data, [](int t, Arm a, std::optional<int>) {
      return t == 1 && a == Arm::flexible;
    });
    CHECK(flex.size() == 100);
    for (const auto& s : flex.subjects()) CHECK(s.switched.has_value());
  }
  SECTION("fixed-low arm has exactly n_per_arm subjects") {
    const auto low = subset(data, [](int t, Arm a, std::optional<int>) {
      return t == 0 && a == Arm::fixed_low;
    });
    CHECK(low.size() == 100);
  }
  SECTION("predicate matching nothing gives an empty dataset") {
    const auto none = subset(data, [](int, Arm, std::optional<int>) { return false; });
    CHECK(none.size() == 0);
    CHECK(none.covariate_names() == data.covariate_names());
  }
  SECTION("chained subsets equal the conjunction") {
    const auto p = [](int t, Arm, std::optional<int>) { return t == 0; };
    const auto q = [](int, Arm a, std::optional<int>) { return a == Arm::placebo; };
    const auto chained = subset(subset(data, p), q);
    const auto combined = subset(data, [&](int t, Arm a, std::optional<int> s) {
      return p(t, a, s) && q(t, a, s);
    });
    REQUIRE(chained.size() == combined.size());
    for (std::size_t i = 0; i < chained.size(); ++i) {
      CHECK(chained.subjects()[i].id == combined.subjects()[i].id);
    }
  }
}

TEST_CASE("load_csv requires both estimation arms") {
  const auto dir = temp_dir();
  ColumnSchema schema = ColumnSchema::canonical({"X1"});
  const std::string path = write_file(dir / "nolow.csv",
                                      "id,T,R,S,Y,X1\n"
                                      "a,1,f,1,1,0\n"
                                      "b,0,p,,1,0\n");
  CHECK_THROWS_AS(load_csv(path, schema), DataError);
}
