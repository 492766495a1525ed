from django.apps import AppConfig


class CutsAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.cuts_app'
