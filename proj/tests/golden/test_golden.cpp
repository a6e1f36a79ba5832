#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "golden_fixture.hpp"

using golden::outputs;
namespace fs = std::filesystem;

namespace {

void compare(const char* name, const std::string& actual) {
  const fs::path path = fs::path(GOLDEN_DIR) / name;
  if (std::getenv("SMALLAREA_UPDATE_GOLDEN")) {
    std::ofstream(path, std::ios::binary) << actual;
  }
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing golden file ", path.string());
  std::stringstream s;
  s << in.rdbuf();
  CHECK_MESSAGE(s.str() == actual, name, " differs from the checked-in copy");
}

}  // namespace

TEST_CASE("table1 golden") { compare("table1.csv", outputs().table1); }
TEST_CASE("regions golden") { compare("regions.csv", outputs().regions); }
TEST_CASE("table5 golden") { compare("table5.csv", outputs().table5); }

TEST_CASE("table layouts") {
  CHECK(outputs().table1.rfind("stratum_id,count_selected,n_selected,count_sampled,n_sampled,count_shelter,total,se\n",
                               0) == 0);
  CHECK(outputs().regions.rfind("region_id,Model 0,Model 1,Model 2,Model 3,model0_se\n", 0) == 0);
  CHECK(outputs().table5.rfind("size,selection,model,mape,us,ol,zero_truth_excluded\n", 0) == 0);
  for (const auto* text : {&outputs().table1, &outputs().regions, &outputs().table5}) {
    std::istringstream lines(*text);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
      CHECK_MESSAGE(line.find('.') == std::string::npos, "non-integer cell in: ", line);
    }
  }
}
