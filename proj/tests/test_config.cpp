#include <doctest.h>

#include "bae/config.hpp"

using namespace bae;

TEST_CASE("config parsing") {
  const ConfigFile f = ConfigFile::parse("# run\nd_in = 16\n\nd_lat=64   # wide\nvariant = ordered\nkind = superposed_sparse\n");
  CHECK(f.values().at("d_lat") == "64");
  const TrainConfig c = to_train_config(f);
  CHECK(c.dims.d_in == 16);
  CHECK(c.dims.d_lat == 64);
  CHECK(c.variant == Variant::ordered);
  REQUIRE(c.data.synthetic.has_value());
  CHECK(c.data.synthetic->d_in == 16);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(ConfigFile::parse("d_in 16\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse(" = 3\n"), ConfigError);
  CHECK_THROWS_AS(to_train_config(ConfigFile::parse("d_in = 4\nlearning_rate = 1\n")), ConfigError);
  CHECK_THROWS_AS(to_train_config(ConfigFile::parse("d_in = four\n")), ConfigError);
  CHECK_THROWS_AS(to_train_config(ConfigFile::parse("d_in = -4\n")), ConfigError);
  CHECK_THROWS_AS(to_train_config(ConfigFile::parse("variant = dense\n")), ConfigError);
  CHECK_THROWS_AS(to_train_config(ConfigFile::parse("data = a.bact\nkind = circle_manifold\n")), ConfigError);
  try {
    ConfigFile::parse("a = 1\nbroken\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("number lists") {
  CHECK(parse_number_list("0,0.1,1") == std::vector<double>{0.0, 0.1, 1.0});
  CHECK(parse_number_list(" 2 , 3") == std::vector<double>{2.0, 3.0});
  CHECK_THROWS_AS(parse_number_list("1,,2"), ConfigError);
  CHECK_THROWS(parse_number_list("1,x"));
}

TEST_CASE("every known key is accepted") {
  for (const std::string& key : known_config_keys()) CHECK(!key.empty());
  ConfigFile f;
  f.set("d_in", "8");
  f.set("kind", "circle_manifold");
  f.set("subspace", "1,3");
  f.set("variant", "mixed");
  f.set("d_mix", "2");
  CHECK(to_train_config(f).data.synthetic->subspace == std::vector<std::size_t>{1, 3});
}
