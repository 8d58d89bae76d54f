from cycledgp.cli import main

main(prog_name="cycledgp")
