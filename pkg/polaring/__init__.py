# polaring - exciton-polaron dynamics in disordered molecular nanorings
__version__ = "0.1.0"
