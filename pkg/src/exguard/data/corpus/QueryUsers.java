import java.sql.Connection;
import java.sql.DriverManager;

public class QueryUsers {
    public static void main(String[] args) {
        String url = args[0];
        Connection connection = DriverManager.getConnection(url, "app", "secret");
        System.out.println("connected to " + url);
    }
}
