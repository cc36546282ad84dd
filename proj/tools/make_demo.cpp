// polar_demo: writes a small deterministic bot/human corpus for trying the CLI.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "polar/demo.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a demo model dir, lexicon and posts file"};
  std::string out;
  polar::demo::DemoSpec spec;
  app.add_option("--out", out, "Destination directory")->required();
  app.add_option("--users", spec.n_users, "Number of users")->capture_default_str();
  app.add_option("--posts-per-user", spec.posts_per_user, "Posts per user")->capture_default_str();
  app.add_option("--seed", spec.seed, "Seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    polar::demo::write_demo(out, spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
