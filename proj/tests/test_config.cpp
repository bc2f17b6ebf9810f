#include <doctest.h>

#include "asncfl/config.hpp"
#include "asncfl/errors.hpp"

using namespace asncfl;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.eps1 == 0.0134);
  CHECK(c.eps2 == 0.005);
  CHECK(c.eps3 == 0.0007);
  CHECK(c.nodes == 16);
  CHECK(c.v_list == std::vector<double>{0.0, 0.5, 0.9});
}

TEST_CASE("parse and serialize round trip") {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.eps1 = 0.1 + 0.2;
  c.v_list = {0.25, 0.75};
  c.recursive = true;
  c.out = "results dir";
  CHECK(parse_config(serialize_config(c)) == c);
  CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
}

TEST_CASE("comments, blanks and partial files") {
  const auto c = parse_config("# hello\n\nnodes = 8  # fewer\nlr=0.05\n");
  CHECK(c.nodes == 8);
  CHECK(c.lr == 0.05);
  CHECK(c.t60 == 0.34);
}

TEST_CASE("bad input") {
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("nodes = eight\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("nodes 8\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("nodes = 2\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("lambda = 2\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("v_list = 0.5, 1.5\n"), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/asncfl.cfg"), InvalidArgument);
}
