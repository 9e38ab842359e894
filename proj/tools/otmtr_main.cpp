#include "otmtr/cli.hpp"

int main(int argc, char** argv) { return otmtr::cli::run(argc, argv); }
