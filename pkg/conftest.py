import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'quantumlayer.settings')
django.setup()
