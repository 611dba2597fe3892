#include "isoscatter/cli.hpp"

int main(int argc, char** argv) { return isoscatter::cli::run(argc, argv); }
