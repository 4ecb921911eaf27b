#include "nbibd/cli.hpp"

int main(int argc, char** argv) { return nbibd::cli::run(argc, argv); }
