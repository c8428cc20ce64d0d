from smoothnash.cli import main

main()
