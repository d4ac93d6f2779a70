#include "pcaids/cli.hpp"

int main(int argc, char** argv) { return pcaids::cli::run(argc, argv); }
